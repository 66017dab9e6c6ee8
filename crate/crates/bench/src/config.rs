//! Plain `key = value` config files whose keys mirror command-line flags.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("--config needs a path")]
    MissingPath,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.starts_with('-') {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

/// Flag tokens for config pairs. `true` becomes a bare switch and `false`
/// is dropped.
pub fn pairs_to_flags(pairs: &[(String, String)]) -> Vec<OsString> {
    let mut out = Vec::new();
    for (key, value) in pairs {
        match value.as_str() {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    out
}

fn config_path(args: &[OsString]) -> Result<Option<PathBuf>, ConfigError> {
    for (i, a) in args.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            return args
                .get(i + 1)
                .map(|p| Some(PathBuf::from(p)))
                .ok_or(ConfigError::MissingPath);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Splices the flags of the `--config` file, if any, in right after the
/// subcommand so that later command-line flags override them.
pub fn merge_config_args(
    args: Vec<OsString>,
    subcommands: &[&str],
) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let flags = pairs_to_flags(&read_config(&path)?);
    let at = args
        .iter()
        .position(|a| a.to_str().is_some_and(|s| subcommands.contains(&s)))
        .map_or(args.len(), |i| i + 1);
    let mut merged = args[..at].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&args[at..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let pairs =
            parse_config("# sweep\nB = 16,256\n\nK=1,2 # inline\nverbose = true\n").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("B".into(), "16,256".into()),
                ("K".into(), "1,2".into()),
                ("verbose".into(), "true".into())
            ]
        );
        let flags = pairs_to_flags(&pairs);
        assert_eq!(
            flags,
            ["--B", "16,256", "--K", "1,2", "--verbose"].map(OsString::from)
        );
        assert!(matches!(
            parse_config("no equals"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn file_flags_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "seed = 3\n").unwrap();
        let args: Vec<OsString> = [
            "prog",
            "run",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
        ]
        .iter()
        .map(OsString::from)
        .collect();
        let merged = merge_config_args(args, &["run"]).unwrap();
        let text: Vec<_> = merged.iter().map(|a| a.to_str().unwrap()).collect();
        assert_eq!(text[..4], ["prog", "run", "--seed", "3"]);
        assert_eq!(text[text.len() - 2..], ["--seed", "9"]);
    }
}
