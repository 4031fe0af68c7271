//! Wire formats shared by the library and the CLI.
//!
//! Matrices travel as `{"rows", "cols", "re", "im"}` with row-major arrays;
//! a missing `im` means all-real. Exponents accept a number or `"inf"`.

use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{cplx, ComplexMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<f64>>,
}

fn to_repr(m: &ComplexMatrix) -> MatrixRepr {
    let (rows, cols) = m.shape();
    let mut re = Vec::with_capacity(rows * cols);
    let mut im = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    let im = if im.iter().all(|v| *v == 0.0) { None } else { Some(im) };
    MatrixRepr { rows, cols, re, im }
}

fn from_repr(r: MatrixRepr) -> Result<ComplexMatrix, String> {
    if r.rows == 0 || r.cols == 0 {
        return Err(format!("matrix must have positive dimensions, got {}x{}", r.rows, r.cols));
    }
    let n = r.rows * r.cols;
    if r.re.len() != n {
        return Err(format!("field `re` has {} entries, expected rows*cols = {}", r.re.len(), n));
    }
    if let Some(im) = &r.im {
        if im.len() != n {
            return Err(format!("field `im` has {} entries, expected rows*cols = {}", im.len(), n));
        }
    }
    Ok(ComplexMatrix::from_fn(r.rows, r.cols, |i, j| {
        let k = i * r.cols + j;
        cplx(r.re[k], r.im.as_ref().map_or(0.0, |v| v[k]))
    }))
}

/// `#[serde(with = "json::matrix")]` for a single matrix.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_repr(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        from_repr(MatrixRepr::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// `#[serde(with = "json::matrix_list")]` for `Vec<ComplexMatrix>`.
pub mod matrix_list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[ComplexMatrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_repr).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexMatrix>, D::Error> {
        Vec::<MatrixRepr>::deserialize(d)?
            .into_iter()
            .map(|r| from_repr(r).map_err(D::Error::custom))
            .collect()
    }
}

/// `#[serde(with = "json::matrix_grid")]` for `Vec<Vec<ComplexMatrix>>`.
pub mod matrix_grid {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[Vec<ComplexMatrix>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter()
            .map(|row| row.iter().map(to_repr).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<ComplexMatrix>>, D::Error> {
        Vec::<Vec<MatrixRepr>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(|r| from_repr(r).map_err(D::Error::custom)).collect())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Num(f64),
    Text(String),
}

/// `#[serde(with = "json::exponent")]` for an `f64` that may be infinite.
pub mod exponent {
    use super::*;

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
        if p.is_infinite() {
            ExponentRepr::Text("inf".into()).serialize(s)
        } else {
            ExponentRepr::Num(*p).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match ExponentRepr::deserialize(d)? {
            ExponentRepr::Num(v) => Ok(v),
            ExponentRepr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| D::Error::custom(format!("cannot read exponent `{t}`"))),
            },
        }
    }
}

/// Same as [`exponent`] for optional fields.
pub mod exponent_opt {
    use super::*;

    pub fn serialize<S: Serializer>(p: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match p {
            Some(v) => exponent::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "exponent")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}
