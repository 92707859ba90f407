//! The JSON interchange format for module records. Emission is canonical
//! (fixed key order, two-space indentation, UTF-8) so that parse ∘ emit is
//! the identity on canonical files byte for byte.

use crate::bk::BKModule;
use crate::error::{Error, Result};
use crate::ring::{EisensteinPoly, Flavor, Prec, SeriesElt};
use serde::{Deserialize, Serialize};

/// One module record: ring parameters, the distinguished polynomial, the
/// Frobenius matrix, and the optional assertions that gate the theorem
/// checkers. Coefficient lists are in u-power order with entries reduced
/// mod p^n_p.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpec {
    pub p: u64,
    pub n_p: u32,
    pub n_u: usize,
    /// E(u) coefficients c_0, ..., c_e (monic Eisenstein)
    pub e: Vec<u64>,
    pub d: usize,
    /// a[i][j] = entry in row i, column j; column j = coordinates of phi(e_j)
    pub a: Vec<Vec<Vec<u64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crystalline: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flavor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sen_operator: Option<Vec<Vec<u64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ModuleSpec {
    pub fn parse(s: &str) -> Result<ModuleSpec> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Canonical emission: fixed field order, pretty-printed, trailing
    /// newline.
    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }

    pub fn label_or_default(&self) -> String {
        self.label.clone().unwrap_or_else(|| "unlabeled".into())
    }

    pub fn flavor_enum(&self) -> Result<Flavor> {
        match self.flavor.as_deref() {
            None | Some("crys") => Ok(Flavor::Crys),
            Some("log") => Ok(Flavor::Log),
            Some(other) => Err(Error::Parse(format!("unknown flavor {other:?}"))),
        }
    }

    pub fn prec(&self) -> Result<Prec> {
        Prec::new(self.p, self.n_p, self.n_u)
    }

    pub fn eisenstein(&self) -> Result<EisensteinPoly> {
        EisensteinPoly::new(self.p, self.n_p, &self.e)
    }

    /// Build the validated module: height search, witness and determinant
    /// checks run here.
    pub fn to_module(&self) -> Result<BKModule> {
        let prec = self.prec()?;
        let eis = self.eisenstein()?;
        if self.a.len() != self.d || self.a.iter().any(|r| r.len() != self.d) {
            return Err(Error::ShapeMismatch(format!(
                "matrix must be {d} x {d}",
                d = self.d
            )));
        }
        let a: Vec<Vec<SeriesElt>> = self
            .a
            .iter()
            .map(|row| {
                row.iter()
                    .map(|coeffs| SeriesElt::from_coeffs(prec, coeffs))
                    .collect()
            })
            .collect();
        let h_max = self
            .weights
            .as_ref()
            .and_then(|w| w.iter().max().copied())
            .map(|r| r.max(1) * self.d as u32)
            .unwrap_or(4 * self.d as u32);
        BKModule::new(
            prec,
            a,
            eis,
            self.crystalline.unwrap_or(false),
            self.weights.clone(),
            Some(h_max),
            self.label_or_default(),
        )
    }

    /// Record for a module given by an explicit matrix over R.
    pub fn from_module_matrix(
        prec: Prec,
        eis: &EisensteinPoly,
        a: &[Vec<SeriesElt>],
        weights: Option<Vec<u32>>,
        crystalline: bool,
        sen_operator: Option<Vec<Vec<u64>>>,
        label: impl Into<String>,
    ) -> ModuleSpec {
        let d = a.len();
        let coeffs: Vec<Vec<Vec<u64>>> = a
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| {
                        let mut c: Vec<u64> =
                            (0..prec.n_u()).map(|i| x.coeff_raw(i)).collect();
                        while c.len() > 1 && *c.last().unwrap() == 0 {
                            c.pop();
                        }
                        c
                    })
                    .collect()
            })
            .collect();
        ModuleSpec {
            p: prec.p(),
            n_p: prec.n_p(),
            n_u: prec.n_u(),
            e: eis.coeffs().to_vec(),
            d,
            a: coeffs,
            weights,
            crystalline: if crystalline { Some(true) } else { None },
            flavor: None,
            sen_operator,
            label: Some(label.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModuleSpec {
        ModuleSpec {
            p: 3,
            n_p: 2,
            n_u: 8,
            e: vec![6, 1],
            d: 1,
            a: vec![vec![vec![6, 1]]],
            weights: Some(vec![1]),
            crystalline: Some(true),
            flavor: None,
            sen_operator: Some(vec![vec![1]]),
            label: Some("sample".into()),
        }
    }

    #[test]
    fn roundtrip_bit_exact() {
        let spec = sample();
        let s = spec.emit();
        let back = ModuleSpec::parse(&s).unwrap();
        assert_eq!(spec, back);
        assert_eq!(back.emit(), s, "emit ∘ parse is the identity on canonical text");
    }

    #[test]
    fn to_module_builds_and_validates() {
        let m = sample().to_module().unwrap();
        assert_eq!(m.height(), 1);
        assert_eq!(m.rank(), 1);
        assert!(m.is_crystalline_flagged());
    }

    #[test]
    fn rejects_unknown_fields() {
        let s = r#"{"p":3,"n_p":2,"n_u":4,"e":[6,1],"d":1,"a":[[[1]]],"bogus":1}"#;
        assert!(ModuleSpec::parse(s).is_err());
    }
}
