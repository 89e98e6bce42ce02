//! Flat key-value config files: `key = value` lines, `#` comments.
//! Command-line flags overlay file entries (flag wins).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub type ConfigMap = BTreeMap<String, String>;

pub fn parse_flat_config(path: impl AsRef<Path>) -> Result<ConfigMap> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = ConfigMap::new();
    for (i, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected 'key = value', got {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn render_flat_config(map: &ConfigMap) -> String {
    let mut out = String::new();
    for (k, v) in map {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn parses_comments_and_whitespace() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"# run\nmodel = gmm\n\n  iters=200  \nrho = const:0.85\n")
            .unwrap();
        let map = parse_flat_config(f.path()).unwrap();
        assert_eq!(map.get("model").unwrap(), "gmm");
        assert_eq!(map.get("iters").unwrap(), "200");
        assert_eq!(map.get("rho").unwrap(), "const:0.85");
    }

    #[test]
    fn render_parse_round_trip() {
        let mut map = ConfigMap::new();
        map.insert("model".into(), "lda".into());
        map.insert("m".into(), "ramp:50".into());
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(render_flat_config(&map).as_bytes()).unwrap();
        assert_eq!(parse_flat_config(f.path()).unwrap(), map);
    }

    #[test]
    fn bad_line_names_line_number() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"model = gmm\nnot a pair\n").unwrap();
        match parse_flat_config(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
