use std::path::Path;

use parity_transformer::report::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Format;

/// Wrapper written around every report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope<C, R> {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the command name and the resolved configuration.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub precision: String,
    pub pass: bool,
    pub config: C,
    pub report: R,
}

pub fn config_hash<C: Serialize>(command: &str, config: &C) -> String {
    let bytes = serde_json::to_vec(&(command, config)).expect("configs serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Result of one command, rendered both ways.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: String,
    pub pass: bool,
    pub json: String,
    pub table: String,
    /// One-line verdict for stderr.
    pub summary: String,
}

impl Outcome {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<C: Serialize, R: Serialize>(
        command: &str,
        config: &C,
        seed: Option<u64>,
        precision: String,
        pass: bool,
        report: &R,
        table: String,
        summary: String,
    ) -> Outcome {
        let env = Envelope {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash(command, config),
            seed,
            precision,
            pass,
            config,
            report,
        };
        let mut json = serde_json::to_string_pretty(&env).expect("reports serialize");
        json.push('\n');
        let mut head = format!(
            "{command}  {}\nconfig {}\n",
            if pass { "PASS" } else { "FAIL" },
            env.config_hash
        );
        if let Some(s) = seed {
            head.push_str(&format!("seed {s}\n"));
        }
        head.push_str(&format!("precision {}\n\n", env.precision));
        Outcome {
            command: command.into(),
            pass,
            json,
            table: head + &table,
            summary: format!("{command}: {} ({summary})", if pass { "PASS" } else { "FAIL" }),
        }
    }

    pub fn rendered(&self, format: Format) -> &str {
        match format {
            Format::Json => &self.json,
            Format::Table => &self.table,
        }
    }

    /// Writes the report to `out` atomically, or to stdout.
    pub fn emit(&self, format: Format, out: Option<&Path>) -> anyhow::Result<()> {
        let text = self.rendered(format);
        match out {
            Some(p) => write_atomic(p, text.as_bytes())?,
            None => {
                use std::io::Write;
                let mut s = std::io::stdout().lock();
                s.write_all(text.as_bytes())?;
                s.flush()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_command_and_config() {
        let a = config_hash("lemmas", &serde_json::json!({"x": 1}));
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash("lemmas", &serde_json::json!({"x": 1})));
        assert_ne!(a, config_hash("lemmas", &serde_json::json!({"x": 2})));
        assert_ne!(a, config_hash("gap-scan", &serde_json::json!({"x": 1})));
    }
}
