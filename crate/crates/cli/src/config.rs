//! `--config` file expansion.
//!
//! A config file holds one `key = value` pair per line, `#` starting a
//! comment. Keys are long flag names without the leading dashes. Each pair
//! becomes `--key value` appended to the command line unless that flag was
//! given explicitly, so the command line always wins.

/// Strips every `--config <path>` (or `--config=<path>`) from `argv` and
/// appends the files' pairs. Later files never override earlier ones.
pub fn expand_args(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut out: Vec<String> = Vec::with_capacity(argv.len());
    let mut paths: Vec<String> = Vec::new();
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            match iter.next() {
                Some(path) => paths.push(path),
                None => return Err("--config requires a file path".into()),
            }
        } else if let Some(path) = arg.strip_prefix("--config=") {
            paths.push(path.to_string());
        } else {
            out.push(arg);
        }
    }
    for path in paths {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read config file {path}: {e}"))?;
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{path} line {}: expected key = value", line_no + 1))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || key.starts_with('-') {
                return Err(format!("{path} line {}: bad key {key:?}", line_no + 1));
            }
            let flag = format!("--{key}");
            if !has_flag(&out, &flag) {
                out.push(flag);
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

fn has_flag(argv: &[String], flag: &str) -> bool {
    argv.iter().any(|a| a == flag || a.strip_prefix(flag).is_some_and(|r| r.starts_with('=')))
}
