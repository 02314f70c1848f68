pub type Overrides = Vec<(String, String)>;

/// Splits `--section.key value` pairs off the argument list; the rest goes to clap.
pub fn split_args(args: Vec<String>) -> Result<(Vec<String>, Overrides), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !key.contains('.') && key != "seed" {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("`--{key}` needs a value"))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn splits_dotted_flags() {
        let (rest, ov) = split_args(strings(&[
            "tikflow",
            "simulate",
            "--config",
            "run.cfg",
            "--dynamics.alpha",
            "3.5",
            "--dynamics.x0=-1,2",
            "--seed",
            "4",
        ]))
        .unwrap();
        assert_eq!(rest, strings(&["tikflow", "simulate", "--config", "run.cfg"]));
        assert_eq!(
            ov,
            vec![
                ("dynamics.alpha".into(), "3.5".into()),
                ("dynamics.x0".into(), "-1,2".into()),
                ("seed".into(), "4".into())
            ]
        );
    }

    #[test]
    fn missing_value_is_an_error() {
        assert!(split_args(strings(&["tikflow", "simulate", "--dynamics.alpha"])).is_err());
    }
}
