//! The bundled scenarios, embedded at build time from `scenarios/`.

use std::path::Path;

use crate::config::{parse_config, ConfigError, Scenario};
use crate::output::write_report;
use crate::run::{run_scenario, RunReport};

pub const BUNDLED: [(&str, &str); 4] = [
    ("flat-mode", include_str!("../../../scenarios/flat-mode.toml")),
    ("curved-coupled", include_str!("../../../scenarios/curved-coupled.toml")),
    ("positive-mode", include_str!("../../../scenarios/positive-mode.toml")),
    ("sphere-soliton", include_str!("../../../scenarios/sphere-soliton.toml")),
];

pub fn bundled(name: &str) -> Option<Result<Scenario, ConfigError>> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| parse_config(text))
}

pub fn bundled_scenarios() -> Result<Vec<Scenario>, ConfigError> {
    BUNDLED.iter().map(|(_, text)| parse_config(text)).collect()
}

/// Runs scenarios on separate threads; each writes only to
/// `out/<scenario name>/`. Reports come back in input order.
pub fn run_all(scenarios: &[Scenario], out: &Path) -> Vec<(RunReport, std::io::Result<()>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| {
                scope.spawn(move || {
                    let report = run_scenario(s);
                    let written = write_report(&report, &out.join(&s.name)).map(|_| ());
                    (report, written)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_match_names() {
        for (name, text) in BUNDLED {
            let s = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
        }
        assert!(bundled("nope").is_none());
    }
}
