use std::path::Path;

use anyhow::{bail, Context, Result};
use oneshot_core::experiments::{ExperimentConfig, ExperimentKind};

/// Reads a TOML run description. Keys missing from the file keep the values
/// of `ExperimentConfig::for_experiment(kind)`, including keys missing inside
/// a section that is present.
pub fn load(path: Option<&Path>, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::for_experiment(kind);
    let Some(path) = path else {
        return Ok(base);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse(&text, base).with_context(|| format!("parsing {}", path.display()))?;
    cfg.experiment = kind;
    Ok(cfg)
}

pub fn parse(text: &str, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let user: toml::Table = toml::from_str(text)?;
    let mut merged = toml::Table::try_from(&base)?;
    merge(&mut merged, user.clone());
    let cfg: ExperimentConfig = merged.try_into()?;
    let mut unknown = Vec::new();
    unknown_keys(&user, &toml::Table::try_from(&cfg)?, "", &mut unknown);
    if !unknown.is_empty() {
        bail!("unknown keys: {}", unknown.join(", "));
    }
    Ok(cfg)
}

fn unknown_keys(user: &toml::Table, known: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in user {
        let path = format!("{prefix}{key}");
        match (known.get(key), value) {
            (None, _) => out.push(path),
            (Some(toml::Value::Table(k)), toml::Value::Table(u)) => unknown_keys(u, k, &format!("{path}."), out),
            _ => {}
        }
    }
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (key, value) in from {
        match (into.get_mut(&key), value) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) if !is_tagged(&src) => merge(dst, src),
            (_, value) => {
                into.insert(key, value);
            }
        }
    }
}

// Tagged enums (surrogates, schedules, update rules) are replaced whole so a
// variant switch does not inherit the old variant's fields.
fn is_tagged(t: &toml::Table) -> bool {
    t.contains_key("kind")
}

#[cfg(test)]
mod tests {
    use super::*;
    use oneshot_core::objective::{NormKind, ProblemSettings};
    use oneshot_core::optim::StepSchedule;
    use oneshot_core::surrogate::SurrogateSpec;

    fn base() -> ExperimentConfig {
        ExperimentConfig::for_experiment(ExperimentKind::RateN)
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(parse("", base()).unwrap(), base());
    }

    #[test]
    fn partial_sections_keep_other_fields() {
        let cfg = parse("seed = 9\n[problem]\nn_div = 4\n[rate_n]\nmax_exp = 6\n", base()).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(
            cfg.problem,
            ProblemSettings {
                n_div: 4,
                ..ProblemSettings::plain_norms()
            }
        );
        assert_eq!(cfg.problem.misfit_norm, NormKind::Euclidean);
        assert_eq!(cfg.rate_n.max_exp, 6);
        assert_eq!(cfg.rate_n.ref_exp, 14);
    }

    #[test]
    fn tagged_values_switch_variant() {
        let cfg = parse(
            "[surrogate]\nkind = \"neural_net\"\nhidden = [3, 3]\n[sgd.steps]\nkind = \"constant\"\nbeta0 = 0.01\n",
            base(),
        )
        .unwrap();
        assert_eq!(cfg.surrogate, SurrogateSpec::NeuralNet { hidden: vec![3, 3] });
        assert_eq!(cfg.sgd.steps, StepSchedule::Constant { beta0: 0.01 });
    }

    #[test]
    fn round_trip() {
        let mut cfg = base();
        cfg.sgd.radius = Some(50.0);
        cfg.output = Some("runs".into());
        let text = toml::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse(&text, base()).unwrap(), cfg);
    }

    #[test]
    fn unknown_types_are_errors() {
        assert!(parse("seed = \"x\"", base()).is_err());
        assert!(parse("[problem]\nn_div = -3", base()).is_err());
        let err = parse("sede = 3\n[problem]\nalpah = 1.0", base()).unwrap_err();
        assert_eq!(err.to_string(), "unknown keys: problem.alpah, sede");
    }
}
