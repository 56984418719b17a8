//! Resolving `--instance` to a registry builtin or an instance file.

use std::path::Path;

use cpath_core::lab::{self, BuiltinInstance, LimitData};
use cpath_core::{NsdpInstance, QmiInstance};

use crate::error::{Error, Result};
use crate::qmi_file;

#[derive(Clone, Debug)]
pub struct Resolved {
    pub instance: QmiInstance,
    pub builtin: Option<BuiltinInstance>,
    pub x0: Option<Vec<f64>>,
    pub xstar: Option<Vec<f64>>,
}

impl Resolved {
    pub fn name(&self) -> &str {
        &self.instance.name
    }

    pub fn require_x0(&self) -> Result<&[f64]> {
        self.x0
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("instance {} has no starting point; pass --x0", self.name())))
    }

    pub fn require_xstar(&self) -> Result<&[f64]> {
        self.xstar
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("instance {} has no known minimizer; pass --xstar", self.name())))
    }

    /// Oracle limits for builtins; numerically computed limits when only
    /// `x*` is known; nothing otherwise.
    pub fn limits(&self) -> Result<Option<LimitData>> {
        if let Some(b) = &self.builtin {
            return Ok(Some(LimitData::from_oracle(&b.instance, &b.oracle)?));
        }
        match &self.xstar {
            Some(xs) => Ok(Some(LimitData::numeric(&self.instance, xs)?)),
            None => Ok(None),
        }
    }
}

/// Registry names take precedence over paths; anything else must be an
/// existing file. Point overrides replace the defaults.
pub fn resolve(name: &str, x0: Option<Vec<f64>>, xstar: Option<Vec<f64>>) -> Result<Resolved> {
    let mut r = if lab::is_builtin_name(name) {
        let b = lab::builtin_instance(name)?;
        Resolved {
            instance: b.instance.clone(),
            x0: Some(b.x0.clone()),
            xstar: Some(b.oracle.xstar.clone()),
            builtin: Some(b),
        }
    } else if Path::new(name).is_file() {
        let loaded = qmi_file::load_qmi(Path::new(name))?;
        Resolved {
            instance: loaded.instance,
            builtin: None,
            x0: loaded.x0,
            xstar: loaded.xstar,
        }
    } else {
        return Err(cpath_core::Error::UnknownInstance {
            name: name.to_string(),
            registry: lab::REGISTRY.iter().map(|s| s.to_string()).collect(),
        }
        .into());
    };
    let n = r.instance.n();
    for (flag, v) in [("--x0", &x0), ("--xstar", &xstar)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(Error::Usage(format!(
                    "{flag} has {} entries but instance {} has n = {n}",
                    v.len(),
                    r.name()
                )));
            }
        }
    }
    if x0.is_some() {
        r.x0 = x0;
    }
    if let Some(xs) = xstar {
        // A user-supplied minimizer replaces the oracle, so the oracle limits
        // no longer apply.
        if r.builtin.as_ref().is_some_and(|b| b.oracle.xstar != xs) {
            r.builtin = None;
        }
        r.xstar = Some(xs);
    }
    Ok(r)
}
