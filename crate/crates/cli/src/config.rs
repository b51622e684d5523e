//! `--config FILE`: `key=value` lines merged into the argument list.
//! Flags given on the command line win over the file.

use std::fs;

use crate::CliError;

/// Keys that are switches rather than valued flags.
const SWITCHES: &[&str] = &["ghost"];

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn has_flag(args: &[String], key: &str) -> bool {
    let long = format!("--{key}");
    args.iter().any(|a| *a == long || a.starts_with(&format!("{long}=")))
}

/// Remove `--config FILE` from `args` and splice the file's entries in
/// after the subcommand.
pub fn expand(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err(CliError::Usage("--config needs a file".into()));
        }
        args.remove(pos);
        args.remove(pos)
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("reading {path}: {e}")))?;
    let entries = parse_config(&text)?;

    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(args.len());
    let mut extra = Vec::new();
    for (key, value) in entries {
        if has_flag(&args, &key) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                _ => return Err(CliError::Usage(format!("{key}: expected true or false"))),
            }
        } else {
            extra.push(format!("--{key}"));
            extra.push(value);
        }
    }
    args.splice(sub..sub, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn lines_and_comments() {
        let e = parse_config("# run\ntau = 0.5\n\nk_max=3\n").unwrap();
        assert_eq!(e, vec![("tau".into(), "0.5".into()), ("k-max".into(), "3".into())]);
        assert!(parse_config("tau 0.5").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("shakhov-cfg-{}", std::process::id()));
        std::fs::write(&dir, "tau=0.5\npr=0.4\nghost=true\n").unwrap();
        let args = expand(v(&["shakhov", "roots", "--config", dir.to_str().unwrap(), "--pr", "1.5", "--k", "0.4"])).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(args, v(&["shakhov", "roots", "--tau", "0.5", "--ghost", "--pr", "1.5", "--k", "0.4"]));
    }
}
