//! A scripted session against a rater that is never fully satisfied, so it
//! always runs the whole budget.

use std::fmt::Write as _;

use mobo_core::{Objective, Session, SessionConfig, Step, SyntheticRater};

use crate::error::CliError;

pub const DEMO_CEILING: f64 = 0.95;

pub fn demo_rater(seed: u64) -> SyntheticRater {
    SyntheticRater {
        noise_sd: 0.05,
        utility_ceiling: DEMO_CEILING,
        ..SyntheticRater::new([0.9, 0.2, 0.1, 0.85, 0.6, 0.7, 0.4, 0.3, 0.5], seed)
    }
}

/// Runs the demo, passing one printable line per iteration to `emit`.
pub fn run(config: &SessionConfig, seed: u64, mut emit: impl FnMut(&str)) -> Result<Session, CliError> {
    let fail = |e: mobo_core::SessionError| CliError::new("session_failed", e.to_string());
    let rater = demo_rater(seed);
    let mut session = Session::start("demo", config.clone()).map_err(fail)?;
    while let Some(issued) = session.pending().cloned() {
        let response = rater.rate(&issued.design, issued.iteration as u64, &config.scales);
        let step = session.submit_rating(response).map_err(fail)?;
        let obs = session.history().last().expect("a rating was just recorded");
        let mut line = format!("{:>2} {:<12} p=[", issued.iteration, format!("{:?}", issued.phase).to_lowercase());
        for (i, v) in issued.design.as_slice().iter().enumerate() {
            let _ = write!(line, "{}{v:.3}", if i > 0 { " " } else { "" });
        }
        line.push_str("] y=[");
        for (i, o) in Objective::ALL.iter().enumerate() {
            let _ = write!(line, "{}{:+.2}", if i > 0 { " " } else { "" }, obs.objectives.get(*o));
        }
        line.push(']');
        if let Some(d) = &issued.diagnostics {
            let _ = write!(line, " ehvi={:.3e}", d.best_score);
        }
        emit(&line);
        if let Step::Finished { stopped_early } = step {
            emit(&format!("finished after {} iterations, stopped_early={stopped_early}", session.iteration()));
        }
    }
    Ok(session)
}
