//! Native BLS12-381 kernels for pployalty.
//!
//! Mirrors the API of `pployalty._purepy` exactly. Scalars cross the
//! boundary as 32-byte big-endian strings already reduced modulo q;
//! points cross it as compressed encodings.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use bls12_381::hash_to_curve::{ExpandMsgXmd, HashToCurve};
use bls12_381::{
    multi_miller_loop, pairing, G1Affine, G1Projective, G2Affine, G2Prepared, G2Projective, Gt,
    Scalar,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn scalar_from_be(data: &[u8]) -> PyResult<Scalar> {
    if data.len() != 32 {
        return Err(PyValueError::new_err("scalar must be 32 bytes"));
    }
    let mut le = [0u8; 32];
    for (i, b) in data.iter().enumerate() {
        le[31 - i] = *b;
    }
    Option::from(Scalar::from_bytes(&le))
        .ok_or_else(|| PyValueError::new_err("scalar not reduced modulo q"))
}

macro_rules! curve_group {
    ($name:ident, $proj:ty, $affine:ty, $width:expr, { $($extra:tt)* }) => {
        #[pyclass(frozen, eq, skip_from_py_object, module = "pployalty._native")]
        #[derive(Clone, PartialEq)]
        pub struct $name {
            pub p: $proj,
        }

        #[pymethods]
        impl $name {
            #[classattr]
            const WIDTH: usize = $width;

            #[staticmethod]
            fn generator() -> Self {
                $name { p: <$proj>::generator() }
            }

            #[staticmethod]
            fn identity() -> Self {
                $name { p: <$proj>::identity() }
            }

            /// Decode a compressed point; rejects off-curve and non-subgroup points.
            #[staticmethod]
            fn from_bytes(data: &[u8]) -> PyResult<Self> {
                let arr: [u8; $width] = data
                    .try_into()
                    .map_err(|_| PyValueError::new_err(concat!("expected ", $width, " bytes")))?;
                let pt: Option<$affine> = Option::from(<$affine>::from_compressed(&arr));
                pt.map(|a| $name { p: <$proj>::from(a) })
                    .ok_or_else(|| PyValueError::new_err("invalid point encoding"))
            }

            fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
                PyBytes::new(py, &<$affine>::from(self.p).to_compressed())
            }

            fn add(&self, other: &$name) -> Self {
                $name { p: self.p + other.p }
            }

            fn neg(&self) -> Self {
                $name { p: -self.p }
            }

            /// Variable-base exponentiation, 4-bit fixed window.
            fn mul(&self, py: Python<'_>, scalar: &[u8]) -> PyResult<Self> {
                scalar_from_be(scalar)?;
                let base = self.p;
                let p = py.detach(move || {
                    let mut table = [<$proj>::identity(); 16];
                    for i in 1..16 {
                        table[i] = table[i - 1] + base;
                    }
                    let mut acc = <$proj>::identity();
                    for byte in scalar.iter() {
                        for nibble in [byte >> 4, byte & 0x0f] {
                            acc = acc.double().double().double().double();
                            if nibble != 0 {
                                acc += table[nibble as usize];
                            }
                        }
                    }
                    acc
                });
                Ok($name { p })
            }

            /// Reference double-and-add multiplication from the curve crate.
            fn mul_ct(&self, py: Python<'_>, scalar: &[u8]) -> PyResult<Self> {
                let k = scalar_from_be(scalar)?;
                let p = self.p;
                Ok($name { p: py.detach(move || p * k) })
            }

            fn is_identity(&self) -> bool {
                bool::from(self.p.is_identity())
            }

            #[staticmethod]
            fn sum(points: Vec<PyRef<'_, $name>>) -> Self {
                let mut acc = <$proj>::identity();
                for pt in points.iter() {
                    acc += pt.p;
                }
                $name { p: acc }
            }

            fn __hash__(&self) -> u64 {
                let mut h = DefaultHasher::new();
                <$affine>::from(self.p).to_compressed().hash(&mut h);
                h.finish()
            }

            fn __repr__(&self) -> String {
                let bytes = <$affine>::from(self.p).to_compressed();
                let hex: String = bytes[..8].iter().map(|b| format!("{:02x}", b)).collect();
                format!(concat!(stringify!($name), "({}..)"), hex)
            }

            $($extra)*
        }
    };
}

curve_group!(G1, G1Projective, G1Affine, 48, {});
curve_group!(G2, G2Projective, G2Affine, 96, {
    /// Hash to G2 with the RFC 9380 suite BLS12381G2_XMD:SHA-256_SSWU_RO_.
    #[staticmethod]
    fn hash(py: Python<'_>, msg: &[u8], dst: &[u8]) -> Self {
        let p = py.detach(|| {
            <G2Projective as HashToCurve<ExpandMsgXmd<sha2::Sha256>>>::hash_to_curve(msg, dst)
        });
        G2 { p }
    }
});

/// Target group element, written multiplicatively.
#[pyclass(frozen, eq, skip_from_py_object, module = "pployalty._native")]
#[derive(Clone, PartialEq)]
pub struct GT {
    pub v: Gt,
}

#[pymethods]
impl GT {
    #[staticmethod]
    fn identity() -> Self {
        GT { v: Gt::identity() }
    }

    fn mul(&self, other: &GT) -> Self {
        // bls12_381 writes Gt additively
        GT { v: self.v + other.v }
    }

    fn pow(&self, py: Python<'_>, scalar: &[u8]) -> PyResult<Self> {
        let k = scalar_from_be(scalar)?;
        let v = self.v;
        Ok(GT { v: py.detach(move || v * k) })
    }

    fn inverse(&self) -> Self {
        GT { v: -self.v }
    }

    fn is_identity(&self) -> bool {
        self.v == Gt::identity()
    }
}

#[pyfunction(name = "pairing")]
fn py_pairing(py: Python<'_>, a: &G1, b: &G2) -> GT {
    let (pa, pb) = (G1Affine::from(a.p), G2Affine::from(b.p));
    GT { v: py.detach(move || pairing(&pa, &pb)) }
}

/// True iff the product of e(a_i, b_i) is the identity of GT.
///
/// One shared final exponentiation; this is the verification hot path.
#[pyfunction]
fn pairing_check(py: Python<'_>, g1s: Vec<PyRef<'_, G1>>, g2s: Vec<PyRef<'_, G2>>) -> PyResult<bool> {
    if g1s.len() != g2s.len() {
        return Err(PyValueError::new_err("operand lists differ in length"));
    }
    let lhs: Vec<G1Affine> = g1s.iter().map(|p| G1Affine::from(p.p)).collect();
    let rhs: Vec<G2Prepared> = g2s.iter().map(|p| G2Prepared::from(G2Affine::from(p.p))).collect();
    Ok(py.detach(move || {
        let terms: Vec<(&G1Affine, &G2Prepared)> = lhs.iter().zip(rhs.iter()).collect();
        multi_miller_loop(&terms).final_exponentiation() == Gt::identity()
    }))
}

/// G2 argument with its Miller-loop line coefficients precomputed.
#[pyclass(frozen, module = "pployalty._native")]
pub struct PreparedG2 {
    prep: G2Prepared,
}

#[pymethods]
impl PreparedG2 {
    #[new]
    fn new(q: &G2) -> Self {
        PreparedG2 { prep: G2Prepared::from(G2Affine::from(q.p)) }
    }

    fn pairing(&self, py: Python<'_>, a: &G1) -> GT {
        let pa = G1Affine::from(a.p);
        let prep = &self.prep;
        GT { v: py.detach(|| multi_miller_loop(&[(&pa, prep)]).final_exponentiation()) }
    }
}

/// Fixed-base comb for G1: table[i][j] = j * 2^(w*i) * base.
#[pyclass(frozen, module = "pployalty._native")]
pub struct FixedBaseG1 {
    window: usize,
    table: Vec<Vec<G1Affine>>,
}

#[pymethods]
impl FixedBaseG1 {
    #[new]
    #[pyo3(signature = (base, window = 4))]
    fn new(base: &G1, window: usize) -> PyResult<Self> {
        if !(1..=8).contains(&window) {
            return Err(PyValueError::new_err("window must be in 1..=8"));
        }
        let rows = (256 + window - 1) / window;
        let mut table = Vec::with_capacity(rows);
        let mut row_base = base.p;
        for _ in 0..rows {
            let mut proj = Vec::with_capacity(1 << window);
            let mut acc = G1Projective::identity();
            for _ in 0..(1usize << window) {
                proj.push(acc);
                acc += row_base;
            }
            let mut affine = vec![G1Affine::identity(); proj.len()];
            G1Projective::batch_normalize(&proj, &mut affine);
            table.push(affine);
            for _ in 0..window {
                row_base = row_base.double();
            }
        }
        Ok(FixedBaseG1 { window, table })
    }

    #[getter]
    fn window(&self) -> usize {
        self.window
    }

    fn mul(&self, py: Python<'_>, scalar: &[u8]) -> PyResult<G1> {
        scalar_from_be(scalar)?;
        let w = self.window;
        let mask = (1usize << w) - 1;
        let table = &self.table;
        let p = py.detach(|| {
            let mut acc = G1Projective::identity();
            for (i, row) in table.iter().enumerate() {
                let bit = i * w;
                let mut digit = 0usize;
                for k in 0..w {
                    let pos = bit + k;
                    if pos >= 256 {
                        break;
                    }
                    // scalar is big-endian: bit pos lives in byte 31 - pos/8
                    let byte = scalar[31 - pos / 8];
                    digit |= (((byte >> (pos % 8)) & 1) as usize) << k;
                }
                let digit = digit & mask;
                if digit != 0 {
                    acc = acc + row[digit];
                }
            }
            acc
        });
        Ok(G1 { p })
    }
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<G1>()?;
    m.add_class::<G2>()?;
    m.add_class::<GT>()?;
    m.add_class::<PreparedG2>()?;
    m.add_class::<FixedBaseG1>()?;
    m.add_function(wrap_pyfunction!(py_pairing, m)?)?;
    m.add_function(wrap_pyfunction!(pairing_check, m)?)?;
    m.add("CURVE", "BLS12-381")?;
    Ok(())
}
