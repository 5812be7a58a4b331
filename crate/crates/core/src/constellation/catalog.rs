//! TOML catalog of per-user designs.
//!
//! ```toml
//! criterion = "eep"
//!
//! [[user]]
//! user_id = 0
//! order = 4
//! phases_deg = [0.0, 90.0, 180.0, 270.0]
//! bit_map = ["00", "01", "11", "10"]
//! ```

use serde::{Deserialize, Serialize};

use super::{Criterion, IndividualConstellation};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub criterion: Criterion,
    /// Joint superposition gains, when the catalog was written with them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    #[serde(rename = "user")]
    pub users: Vec<CatalogUser>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogUser {
    pub user_id: usize,
    pub order: usize,
    pub phases_deg: Vec<f64>,
    pub bit_map: Vec<String>,
}

fn round_sig12(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

impl Catalog {
    pub fn from_design<T: Scalar>(
        criterion: Criterion,
        constellations: &[IndividualConstellation<T>],
        gains: Option<&[T]>,
    ) -> Self {
        let users = constellations
            .iter()
            .map(|c| {
                let width = c.bits_per_symbol() as usize;
                CatalogUser {
                    user_id: c.user_id(),
                    order: c.order(),
                    phases_deg: c
                        .phases()
                        .iter()
                        .map(|p| round_sig12(p.as_f64().to_degrees()))
                        .collect(),
                    bit_map: c.bit_map().iter().map(|l| format!("{l:0width$b}")).collect(),
                }
            })
            .collect();
        Catalog {
            criterion,
            gains: gains.map(|g| g.iter().map(|x| x.as_f64()).collect()),
            users,
        }
    }

    pub fn constellations<T: Scalar>(&self) -> Result<Vec<IndividualConstellation<T>>> {
        self.users
            .iter()
            .map(|u| {
                if u.phases_deg.len() != u.order {
                    return Err(Error::Format(format!(
                        "user {}: order {} but {} phases",
                        u.user_id,
                        u.order,
                        u.phases_deg.len()
                    )));
                }
                let width = u.order.trailing_zeros() as usize;
                let labels = u
                    .bit_map
                    .iter()
                    .map(|s| {
                        if s.len() != width {
                            return Err(Error::Format(format!("label `{s}` is not {width} bits")));
                        }
                        u32::from_str_radix(s, 2).map_err(|_| Error::Format(format!("label `{s}` is not binary")))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                let phases = u.phases_deg.iter().map(|d| T::lit(d.to_radians())).collect();
                IndividualConstellation::from_parts(u.user_id, phases, labels)
            })
            .collect()
    }
}

pub fn write_catalog<T: Scalar>(
    criterion: Criterion,
    constellations: &[IndividualConstellation<T>],
    gains: Option<&[T]>,
) -> String {
    toml::to_string(&Catalog::from_design(criterion, constellations, gains)).expect("catalog serializes")
}

pub fn read_catalog(text: &str) -> Result<Catalog> {
    toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{design_eep, design_uep};

    #[test]
    fn roundtrip_preserves_design() {
        let d = design_uep(2, 8, &[1.0, 0.6], &[0.0, 0.123_456_789]).unwrap();
        let text = write_catalog(Criterion::Uep, &d, Some(&[1.0, 0.5]));
        let cat = read_catalog(&text).unwrap();
        assert_eq!(cat.criterion, Criterion::Uep);
        assert_eq!(cat.gains, Some(vec![1.0, 0.5]));
        let back: Vec<IndividualConstellation<f64>> = cat.constellations().unwrap();
        for (a, b) in d.iter().zip(&back) {
            assert_eq!(a.bit_map(), b.bit_map());
            for (pa, pb) in a.phases().iter().zip(b.phases()) {
                assert!((pa - pb).abs() < 1e-10, "{pa} vs {pb}");
            }
        }
    }

    #[test]
    fn labels_are_bit_strings() {
        let text = write_catalog::<f64>(Criterion::Eep, &design_eep(1, 4).unwrap(), None);
        assert!(text.contains(r#"bit_map = ["00", "01", "11", "10"]"#), "{text}");
        assert!(text.contains("phases_deg = [0.0, 90.0, 180.0, 270.0]"), "{text}");
    }

    #[test]
    fn rejects_malformed() {
        let bad_label = "criterion = \"eep\"\n[[user]]\nuser_id = 0\norder = 2\nphases_deg = [0.0, 180.0]\nbit_map = [\"0\", \"2\"]\n";
        assert!(read_catalog(bad_label).unwrap().constellations::<f64>().is_err());
        let unknown = "criterion = \"eep\"\nextra = 1\n";
        assert!(read_catalog(unknown).is_err());
        let short = "criterion = \"eep\"\n[[user]]\nuser_id = 0\norder = 4\nphases_deg = [0.0, 180.0]\nbit_map = [\"00\", \"01\"]\n";
        assert!(read_catalog(short).unwrap().constellations::<f64>().is_err());
    }
}
