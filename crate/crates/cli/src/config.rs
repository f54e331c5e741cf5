//! `--config path` support. The file is a JSON object whose keys mirror the
//! long flags of the chosen subcommand; it is expanded into flags placed
//! before the command line ones, so explicit flags win.

use std::ffi::OsString;

use serde_json::Value;

fn flag_tokens(key: &str, value: &Value) -> Result<Vec<String>, String> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &Value| match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        other => Err(format!("config key {key:?}: unsupported value {other}")),
    };
    match value {
        Value::Bool(true) => Ok(vec![flag]),
        Value::Bool(false) | Value::Null => Ok(Vec::new()),
        Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
            Ok(vec![flag, parts.join(",")])
        }
        v => Ok(vec![flag, scalar(v)?]),
    }
}

fn config_path(args: &mut Vec<OsString>) -> Result<Option<OsString>, String> {
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a path".into());
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = a.strip_prefix("--config=") {
            found = Some(OsString::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

/// Replaces `--config path` in `args` by the flags it describes.
pub fn expand(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.to_string_lossy()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.to_string_lossy()))?;
    let Value::Object(map) = value else {
        return Err("config file must hold a JSON object".into());
    };
    let mut tokens = Vec::new();
    for (k, v) in &map {
        tokens.extend(flag_tokens(k, v)?.into_iter().map(OsString::from));
    }
    let at = if args.len() > 1 && !args[1].to_string_lossy().starts_with('-') { 2 } else { 1 };
    let at = at.min(args.len());
    args.splice(at..at, tokens);
    Ok(args)
}
