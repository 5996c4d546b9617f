//! The `--kernel` mini-grammar: `name[:key=value,key=value]`.

use std::collections::BTreeMap;

use kernel_treelets::KernelSpec;

pub const GRAMMAR: &str = "\
rbf:sigma=S            Gaussian RBF, exp(-|x-y|^2 / (2 S^2))
linear                 dot product
poly:alpha=A,c0=C,r=R  (A x.y + C)^R, integer R >= 1
missing-rbf:gamma=G    exp(-G * mean squared difference over shared attributes)
graph:diag=auto|D      adjacency with D on the diagonal; auto = max degree";

/// A kernel as given on the command line; `diag=auto` is resolved once the
/// graph has been read.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelArg {
    Spec(KernelSpec),
    GraphAuto,
}

impl KernelArg {
    pub fn is_graph(&self) -> bool {
        match self {
            KernelArg::Spec(s) => s.is_graph(),
            KernelArg::GraphAuto => true,
        }
    }
}

pub fn parse_kernel(text: &str) -> Result<KernelArg, String> {
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut params = BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found '{part}'"))?;
        if params.insert(k.trim(), v.trim()).is_some() {
            return Err(format!("parameter '{k}' given twice"));
        }
    }
    let mut take = |key: &str| params.remove(key);
    let number = |key: &str, v: Option<&str>| -> Result<f64, String> {
        let v = v.ok_or_else(|| format!("kernel '{name}' needs {key}="))?;
        v.parse::<f64>()
            .map_err(|_| format!("{key}: '{v}' is not a number"))
    };

    let arg = match name {
        "rbf" => KernelArg::Spec(KernelSpec::Rbf {
            sigma: number("sigma", take("sigma"))?,
        }),
        "linear" => KernelArg::Spec(KernelSpec::Linear),
        "poly" => {
            let alpha = number("alpha", take("alpha"))?;
            let c0 = number("c0", take("c0"))?;
            let r = take("r").ok_or("kernel 'poly' needs r=")?;
            let r = r
                .parse::<u32>()
                .map_err(|_| format!("r: '{r}' is not a positive integer"))?;
            KernelArg::Spec(KernelSpec::Polynomial { alpha, c0, r })
        }
        "missing-rbf" => KernelArg::Spec(KernelSpec::MissingRbf {
            gamma: number("gamma", take("gamma"))?,
        }),
        "graph" => match take("diag") {
            None | Some("auto") => KernelArg::GraphAuto,
            Some(d) => KernelArg::Spec(KernelSpec::GraphAdjacency {
                diag: number("diag", Some(d))?,
            }),
        },
        other => return Err(format!("unknown kernel '{other}'\n{GRAMMAR}")),
    };
    if let Some(k) = params.keys().next() {
        return Err(format!("unknown parameter '{k}' for kernel '{name}'"));
    }
    if let KernelArg::Spec(spec) = &arg {
        spec.validate().map_err(|e| e.to_string())?;
    }
    Ok(arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_forms() {
        assert_eq!(
            parse_kernel("rbf:sigma=0.1"),
            Ok(KernelArg::Spec(KernelSpec::Rbf { sigma: 0.1 }))
        );
        assert_eq!(
            parse_kernel("linear"),
            Ok(KernelArg::Spec(KernelSpec::Linear))
        );
        assert_eq!(
            parse_kernel("poly:alpha=1,c0=1,r=3"),
            Ok(KernelArg::Spec(KernelSpec::Polynomial {
                alpha: 1.0,
                c0: 1.0,
                r: 3
            }))
        );
        assert_eq!(
            parse_kernel("missing-rbf:gamma=32"),
            Ok(KernelArg::Spec(KernelSpec::MissingRbf { gamma: 32.0 }))
        );
        assert_eq!(parse_kernel("graph:diag=auto"), Ok(KernelArg::GraphAuto));
        assert_eq!(parse_kernel("graph"), Ok(KernelArg::GraphAuto));
        assert_eq!(
            parse_kernel("graph:diag=1045"),
            Ok(KernelArg::Spec(KernelSpec::GraphAdjacency { diag: 1045.0 }))
        );
    }

    #[test]
    fn rejected_forms() {
        for bad in [
            "rbf",
            "rbf:sigma=0",
            "rbf:sigma=x",
            "rbf:sigma=1,sigma=2",
            "rbf:sigma=1,gamma=2",
            "poly:alpha=1,c0=1",
            "poly:alpha=1,c0=1,r=-1",
            "cosine",
            "linear:foo",
        ] {
            assert!(parse_kernel(bad).is_err(), "{bad}");
        }
    }
}
