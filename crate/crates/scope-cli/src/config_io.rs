//! Config file loading: TOML -> RunConfig with dotted-path overrides.
//!
//! Overrides arrive as `path.to.field=value` strings. Values are parsed as
//! TOML fragments so `6` becomes an integer and `0.8` a float; anything that
//! does not parse (like a bare enum word) is taken as a string.

use scope_core::{Error, RunConfig};

pub fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value), Error> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override {spec:?} is not key=value")))?;
    if path.is_empty() {
        return Err(Error::InvalidConfig(format!("override {spec:?} has empty key")));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(table) => table["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((path.split('.').map(str::to_string).collect(), value))
}

pub fn set_path(root: &mut toml::Value, path: &[String], value: toml::Value) -> Result<(), Error> {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{key} is not a section")))?;
        node = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let last = &path[path.len() - 1];
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::InvalidConfig(format!("{last} parent is not a section")))?;
    table.insert(last.clone(), value);
    Ok(())
}

/// Reads the config file, applies overrides, deserializes and validates.
pub fn load_config(
    path: &std::path::Path,
    overrides: &[String],
    out_dir: Option<&str>,
) -> Result<RunConfig, Error> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut value: toml::Value = text
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    for spec in overrides {
        let (path, v) = parse_override(spec)?;
        set_path(&mut value, &path, v)?;
    }
    let mut config: RunConfig = value
        .try_into()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    if let Some(dir) = out_dir {
        config.out_dir = dir.to_string();
    }
    config.validate()?;
    Ok(config)
}

/// Rewrites `--section.field=value` flags as `--set section.field=value` so
/// clap sees a single repeatable option.
pub fn preprocess_args(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    for arg in args {
        if let Some(body) = arg.strip_prefix("--") {
            if body.contains('=') && body.split('=').next().is_some_and(|k| k.contains('.')) {
                out.push("--set".to_string());
                out.push(body.to_string());
                continue;
            }
        }
        out.push(arg);
    }
    out
}
