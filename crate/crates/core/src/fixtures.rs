//! Small models shipped with the crate, used by `bench`, the examples and
//! the tests.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{load_model, Model};

/// A shipped model with an anchor point and optional reference data.
#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub model: &'static str,
    pub dataset: Option<&'static str>,
    /// Point explained by `bench`.
    pub anchor: &'static [f64],
    /// Extra reference baseline, if the fixture has a meaningful one.
    pub reference: Option<&'static [f64]>,
}

macro_rules! text {
    ($file:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/", $file))
    };
}

pub const BEE: &str = text!("bee.json");
pub const BEE_DATA: &str = text!("bee.csv");
pub const AND: &str = text!("and.json");
pub const OR: &str = text!("or.json");
pub const OR_AND3: &str = text!("or_and3.json");
pub const LINEAR: &str = text!("linear.json");
pub const LOAN: &str = text!("loan.json");
pub const LOAN_DATA: &str = text!("loan.csv");
pub const KINK: &str = text!("kink.json");
pub const KINK_DATA: &str = text!("kink.csv");
pub const TANH_MLP: &str = text!("tanh_mlp.json");
pub const REGION_TREE: &str = text!("region_tree.json");
pub const TWO_SIDED: &str = text!("two_sided.json");

/// Fixtures covered by `bench`, in output order.
pub const BENCH: &[Fixture] = &[
    Fixture {
        name: "linear",
        model: LINEAR,
        dataset: None,
        anchor: &[1.5, -2.0],
        reference: Some(&[0.5, 0.5]),
    },
    Fixture {
        name: "and",
        model: AND,
        dataset: None,
        anchor: &[1.0, 1.0],
        reference: None,
    },
    Fixture {
        name: "or_and3",
        model: OR_AND3,
        dataset: None,
        anchor: &[1.0, 1.0, 1.0],
        reference: None,
    },
    Fixture {
        name: "loan",
        model: LOAN,
        dataset: Some(LOAN_DATA),
        anchor: &[50.0, 10.0],
        reference: Some(&[40.0, 30.0]),
    },
    Fixture {
        name: "bee",
        model: BEE,
        dataset: Some(BEE_DATA),
        anchor: &[6.0, 4.0],
        reference: None,
    },
    Fixture {
        name: "kink",
        model: KINK,
        dataset: Some(KINK_DATA),
        anchor: &[0.0; 8],
        reference: None,
    },
    Fixture {
        name: "tanh_mlp",
        model: TANH_MLP,
        dataset: None,
        anchor: &[0.5, -0.5],
        reference: None,
    },
];

/// Looks up a bench fixture by name.
pub fn find(name: &str) -> Option<&'static Fixture> {
    BENCH.iter().find(|f| f.name == name)
}

impl Fixture {
    pub fn load_model(&self) -> Result<Model> {
        load_model(self.model)
    }

    pub fn load_dataset(&self, model: &Model) -> Result<Option<Dataset>> {
        self.dataset
            .map(|csv| Dataset::from_csv(model.schema().clone(), csv.as_bytes()))
            .transpose()
    }

    /// The same fixture with model and data read from `dir/<name>.json` and
    /// `dir/<name>.csv`.
    pub fn from_dir(&self, dir: &std::path::Path) -> Result<OwnedFixture> {
        let read = |file: String| {
            std::fs::read_to_string(dir.join(&file)).map_err(|e| Error::parse(file, e.to_string()))
        };
        Ok(OwnedFixture {
            base: *self,
            model: read(format!("{}.json", self.name))?,
            dataset: match self.dataset {
                Some(_) => Some(read(format!("{}.csv", self.name))?),
                None => None,
            },
        })
    }
}

/// A fixture whose documents were read from disk.
#[derive(Debug, Clone)]
pub struct OwnedFixture {
    pub base: Fixture,
    pub model: String,
    pub dataset: Option<String>,
}

impl OwnedFixture {
    pub fn embedded(base: Fixture) -> Self {
        OwnedFixture {
            base,
            model: base.model.to_string(),
            dataset: base.dataset.map(str::to_string),
        }
    }

    pub fn load_model(&self) -> Result<Model> {
        load_model(&self.model)
    }

    pub fn load_dataset(&self, model: &Model) -> Result<Option<Dataset>> {
        self.dataset
            .as_ref()
            .map(|csv| Dataset::from_csv(model.schema().clone(), csv.as_bytes()))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::DataPoint;

    #[test]
    fn every_fixture_loads_and_scores_its_anchor() {
        for f in BENCH {
            let m = f.load_model().unwrap();
            let _ = f.load_dataset(&m).unwrap();
            m.score(&DataPoint::new(f.anchor.to_vec())).unwrap();
        }
        for doc in [OR, TWO_SIDED, REGION_TREE] {
            load_model(doc).unwrap();
        }
    }

    #[test]
    fn bee_scores_as_expected() {
        let m = load_model(BEE).unwrap();
        let out = m.score(&DataPoint::new(vec![6.0, 4.0])).unwrap();
        assert_eq!(out.predicted_class.as_deref(), Some("bee"));
        let out = m.score(&DataPoint::new(vec![6.0, 2.0])).unwrap();
        assert_eq!(out.predicted_class.as_deref(), Some("fly"));
        let out = m.score(&DataPoint::new(vec![8.0, 0.0])).unwrap();
        assert_eq!(out.predicted_class.as_deref(), Some("spider"));
    }

    #[test]
    fn kink_is_linear_inside_radius_two() {
        let m = load_model(KINK).unwrap();
        let x = [1.9, -2.0, 0.3, 0.0, -1.0, 2.0, 1.0, -0.5];
        assert!((m.raw(&x).unwrap()[0] - x.iter().sum::<f64>()).abs() < 1e-9);
        let y = [3.0, -2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        // each unit beyond |2| adds 4
        assert!((m.raw(&y).unwrap()[0] - (0.5 + 4.0 + 2.0)).abs() < 1e-9);
    }
}
