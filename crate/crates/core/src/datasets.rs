//! Built-in datasets: the eight-schools coaching experiment and the
//! twenty-seven hospital profiling table.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::{Dataset, GroupObservation};

pub const EIGHT_SCHOOLS: &str = "eight-schools";
pub const HOSPITAL_27: &str = "hospital-27";
pub const BUILTIN_NAMES: [&str; 2] = [EIGHT_SCHOOLS, HOSPITAL_27];

/// Estimated coaching effects `y_j`.
pub const EIGHT_SCHOOLS_Y: [f64; 8] = [28.0, 8.0, -3.0, 7.0, -1.0, 1.0, 18.0, 12.0];
/// Standard errors `√V_j`.
pub const EIGHT_SCHOOLS_SE: [f64; 8] = [15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0];

/// `(Y_1j, Y_2j, x_2j, n_j)`: non-surgical and surgical problem percentages,
/// mean severity, number of interviewees.
pub const HOSPITAL_TABLE: [(f64, f64, f64, u32); 27] = [
    (10.18, 15.06, 0.75, 24),
    (11.55, 17.97, 0.62, 32),
    (16.21, 12.50, 0.66, 32),
    (12.31, 14.88, 0.26, 43),
    (12.88, 15.21, 0.96, 44),
    (11.84, 17.69, 0.44, 45),
    (14.82, 16.91, 0.44, 48),
    (13.05, 15.07, 0.55, 49),
    (12.43, 12.01, 0.33, 51),
    (8.35, 9.43, 0.47, 53),
    (17.97, 26.82, 0.48, 56),
    (11.84, 15.64, 0.34, 58),
    (12.43, 13.94, 0.28, 58),
    (14.73, 15.40, 0.63, 60),
    (15.80, 11.50, 0.26, 61),
    (14.81, 20.56, 0.56, 62),
    (11.14, 13.02, 0.02, 62),
    (17.12, 14.60, 0.41, 66),
    (16.93, 16.28, 0.56, 68),
    (11.02, 13.52, 0.34, 68),
    (14.69, 16.49, 0.56, 72),
    (10.48, 14.24, 0.79, 77),
    (15.82, 15.13, 0.47, 87),
    (12.66, 14.99, 0.71, 122),
    (10.41, 17.25, 0.45, 124),
    (10.32, 10.13, 0.05, 149),
    (13.72, 18.18, 0.77, 198),
];

/// Per-patient covariance of the two percentages; hospital `j` has `V_j = Σ/n_j`.
pub const HOSPITAL_SIGMA: [f64; 4] = [148.87, 140.43, 140.43, 490.60];

#[derive(Clone, Debug)]
pub struct BuiltinDataset {
    pub name: &'static str,
    pub dataset: Dataset,
    pub sigma: Option<SpdMatrix>,
}

pub fn eight_schools() -> Dataset {
    let groups = EIGHT_SCHOOLS_Y
        .iter()
        .zip(EIGHT_SCHOOLS_SE)
        .map(|(&y, se)| GroupObservation::scalar(y, se * se).expect("table values are valid"))
        .collect();
    Dataset::new(EIGHT_SCHOOLS, groups).expect("table values are valid")
}

pub fn hospital_sigma() -> SpdMatrix {
    SpdMatrix::from_row_slice(2, &HOSPITAL_SIGMA).expect("Σ is positive definite")
}

pub fn hospital_27() -> Dataset {
    let sigma = hospital_sigma();
    let groups = HOSPITAL_TABLE
        .iter()
        .map(|&(y1, y2, x2, n)| {
            let v = sigma.scale(1.0 / n as f64).expect("n_j is positive");
            GroupObservation::new(DVector::from_vec(vec![y1, y2]), v, DVector::from_vec(vec![1.0, x2]))
                .expect("table values are valid")
        })
        .collect();
    Dataset::new(HOSPITAL_27, groups).expect("table values are valid")
}

pub fn builtin(name: &str) -> Result<BuiltinDataset> {
    match name {
        EIGHT_SCHOOLS => Ok(BuiltinDataset {
            name: EIGHT_SCHOOLS,
            dataset: eight_schools(),
            sigma: None,
        }),
        HOSPITAL_27 => Ok(BuiltinDataset {
            name: HOSPITAL_27,
            dataset: hospital_27(),
            sigma: Some(hospital_sigma()),
        }),
        other => Err(Error::Config(format!(
            "unknown builtin dataset {other:?}; known: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
