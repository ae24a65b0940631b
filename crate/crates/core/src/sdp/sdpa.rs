//! SDPA sparse export and import.
//!
//! A program `Σ_j Tr(F_rj X_j) = b_r, X_j ⪰ 0` is written as the SDPA dual
//! problem `max F_0•Y s.t. F_r•Y = c_r, Y ⪰ 0` with `c = b`, `F_0 = 0` and each
//! Hermitian `F_rj` realified as `R(F)/2`, `R(F) = [[Re F, -Im F], [Im F, Re F]]`,
//! so that `Tr(R(F)/2 · R(X)) = Tr(F X)`. Block sizes are `2·d_j`.

use std::fmt::Write as _;
use std::path::Path;

use super::{herm_to_vec, vec_to_herm, BlockKind, BlockSpec, ConeProgram, GroupRole};
use crate::error::{Error, Result};
use crate::tensor_core::{CMat, C64};

/// Real embedding `[[Re M, -Im M], [Im M, Re M]]`.
pub fn realify(m: &CMat) -> nalgebra::DMatrix<f64> {
    let d = m.nrows();
    nalgebra::DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = m[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Coefficient matrices `F_rj` of row `r`, as `(block, matrix)` pairs.
fn row_matrices(p: &ConeProgram, r: usize) -> Vec<(usize, CMat)> {
    let mut per_block: Vec<Option<Vec<f64>>> = vec![None; p.blocks().len()];
    for &(v, c) in &p.rows()[r] {
        let j = (0..p.blocks().len()).find(|&j| p.block_range(j).contains(&v)).unwrap();
        let start = p.block_range(j).start;
        let len = p.block_range(j).len();
        per_block[j].get_or_insert_with(|| vec![0.0; len])[v - start] += c;
    }
    per_block
        .into_iter()
        .enumerate()
        .filter_map(|(j, v)| v.map(|v| (j, vec_to_herm(&v, p.blocks()[j].dim))))
        .collect()
}

pub fn export_string(p: &ConeProgram) -> Result<String> {
    if let Some(b) = p.blocks().iter().find(|b| b.kind == BlockKind::Free) {
        return Err(Error::InvalidArgument(format!("free block `{}` has no SDPA counterpart", b.name)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "\"realified Hermitian feasibility program: {} rows, {} blocks", p.num_rows(), p.blocks().len());
    let _ = writeln!(s, "{}", p.num_rows());
    let _ = writeln!(s, "{}", p.blocks().len());
    let sizes: Vec<String> = p.blocks().iter().map(|b| (2 * b.dim).to_string()).collect();
    let _ = writeln!(s, "{}", sizes.join(" "));
    let cs: Vec<String> = p.b().iter().map(|v| format!("{:?}", v)).collect();
    let _ = writeln!(s, "{}", cs.join(" "));
    for r in 0..p.num_rows() {
        for (j, f) in row_matrices(p, r) {
            let rf = realify(&f);
            for i in 0..rf.nrows() {
                for k in i..rf.ncols() {
                    let v = rf[(i, k)] * 0.5;
                    if v != 0.0 {
                        let _ = writeln!(s, "{} {} {} {} {:?}", r + 1, j + 1, i + 1, k + 1, v);
                    }
                }
            }
        }
    }
    Ok(s)
}

pub fn export_interchange(p: &ConeProgram, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, export_string(p)?)?;
    Ok(())
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("bad {} `{}`", what, tok)))
}

/// Reads an SDPA sparse file produced by [`export_string`]. Every row
/// becomes a one-row structural group.
pub fn import_string(text: &str) -> Result<ConeProgram> {
    let mut lines = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let tokens = |l: Option<&str>| -> Result<Vec<String>> {
        let l = l.ok_or_else(|| Error::Parse("unexpected end of SDPA file".into()))?;
        Ok(l.split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '(' || c == ')')
            .filter(|t| !t.is_empty())
            .map(|t| t.to_string())
            .collect())
    };
    let m: usize = parse_num(&tokens(lines.next())?[0], "row count")?;
    let nb: usize = parse_num(&tokens(lines.next())?[0], "block count")?;
    let sizes: Vec<i64> = tokens(lines.next())?.iter().take(nb).map(|t| parse_num(t, "block size")).collect::<Result<_>>()?;
    let mut c: Vec<f64> = Vec::with_capacity(m);
    while c.len() < m {
        for t in tokens(lines.next())? {
            c.push(parse_num(&t, "objective entry")?);
        }
    }
    if sizes.len() != nb || sizes.iter().any(|&s| s <= 0 || s % 2 != 0) {
        return Err(Error::Parse("block sizes must be positive and even".into()));
    }
    let dims: Vec<usize> = sizes.iter().map(|&s| (s / 2) as usize).collect();
    let mut mats: Vec<Vec<CMat>> = (0..m).map(|_| dims.iter().map(|&d| CMat::zeros(d, d)).collect()).collect();
    for line in lines {
        let t = tokens(Some(line))?;
        if t.len() != 5 {
            return Err(Error::Parse(format!("expected 5 fields, got `{}`", line)));
        }
        let r: usize = parse_num(&t[0], "matrix number")?;
        let j: usize = parse_num(&t[1], "block number")?;
        let i: usize = parse_num(&t[2], "row index")?;
        let k: usize = parse_num(&t[3], "column index")?;
        let v: f64 = parse_num(&t[4], "value")?;
        if r == 0 {
            if v != 0.0 {
                return Err(Error::Parse("nonzero constant matrix is not supported".into()));
            }
            continue;
        }
        if r > m || j == 0 || j > nb {
            return Err(Error::Parse(format!("entry out of range: `{}`", line)));
        }
        let d = dims[j - 1];
        let (i, k) = (i - 1, k - 1);
        if i >= 2 * d || k >= 2 * d {
            return Err(Error::Parse(format!("index out of range: `{}`", line)));
        }
        let f = &mut mats[r - 1][j - 1];
        let v = 2.0 * v;
        // Upper-left block carries Re F; lower-left carries Im F, upper-right -Im F.
        match (i < d, k < d) {
            (true, true) => {
                f[(i, k)].re = v;
                f[(k, i)].re = v;
            }
            (true, false) => {
                let (a, b) = (i, k - d);
                f[(a, b)].im = -v;
                f[(b, a)].im = v;
            }
            (false, false) => {}
            (false, true) => unreachable!("upper triangle only"),
        }
    }
    let mut p = ConeProgram::new();
    for (j, &d) in dims.iter().enumerate() {
        p.add_block(BlockSpec {
            name: format!("X{}", j + 1),
            dim: d,
            kind: BlockKind::Psd,
            trace_bound: None,
        });
    }
    for (r, blocks) in mats.iter().enumerate() {
        let mut row = Vec::new();
        for (j, f) in blocks.iter().enumerate() {
            // Tr(F X) = <conj-free coordinates of F, coordinates of X>.
            let coords = herm_to_vec(f);
            let start = p.block_range(j).start;
            row.extend(coords.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(k, &c)| (start + k, c)));
        }
        p.add_group(&format!("row{}", r + 1), GroupRole::Structural, vec![row], CMat::from_element(1, 1, C64::new(c[r], 0.0)))?;
    }
    Ok(p)
}

pub fn import_interchange(path: impl AsRef<Path>) -> Result<ConeProgram> {
    import_string(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_core::eigh;
    use proptest::prelude::*;

    fn toy() -> ConeProgram {
        let mut p = ConeProgram::new();
        p.add_block(BlockSpec {
            name: "X".into(),
            dim: 2,
            kind: BlockKind::Psd,
            trace_bound: None,
        });
        p.add_block(BlockSpec {
            name: "Y".into(),
            dim: 3,
            kind: BlockKind::Psd,
            trace_bound: None,
        });
        p.add_scalar_constraint("trace", GroupRole::Target(0), vec![(0, 1.0), (1, 1.0)], 1.0).unwrap();
        p.add_scalar_constraint("mixed", GroupRole::Structural, vec![(2, 0.5), (3, -1.25), (4, 2.0), (9, 0.75)], -0.5)
            .unwrap();
        p
    }

    #[test]
    fn roundtrip_preserves_rows() {
        let p = toy();
        let text = export_string(&p).unwrap();
        let q = import_string(&text).unwrap();
        assert_eq!(q.num_rows(), p.num_rows());
        let dims: Vec<usize> = q.blocks().iter().map(|b| b.dim).collect();
        assert_eq!(dims, vec![2, 3]);
        assert_eq!(q.b(), p.b());
        for r in 0..p.num_rows() {
            let mut a = p.rows()[r].clone();
            let mut b = q.rows()[r].clone();
            a.sort_by_key(|e| e.0);
            b.sort_by_key(|e| e.0);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_trace_constraint_has_one_row() {
        let mut p = ConeProgram::new();
        p.add_block(BlockSpec {
            name: "X".into(),
            dim: 2,
            kind: BlockKind::Psd,
            trace_bound: None,
        });
        p.add_scalar_constraint("trace", GroupRole::Target(0), vec![(0, 1.0), (1, 1.0)], 1.0).unwrap();
        let text = export_string(&p).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('"')).collect();
        assert_eq!(body[0], "1");
        assert_eq!(body[2], "4");
    }

    #[test]
    fn free_blocks_are_rejected() {
        let mut p = toy();
        p.add_block(BlockSpec {
            name: "F".into(),
            dim: 1,
            kind: BlockKind::Free,
            trace_bound: None,
        });
        assert!(export_string(&p).is_err());
    }

    proptest! {
        #[test]
        fn realification_duplicates_spectrum(vals in proptest::collection::vec(-3.0f64..3.0, 18)) {
            let d = 3;
            let raw = CMat::from_fn(d, d, |i, j| C64::new(vals[2 * (i * d + j)], vals[2 * (i * d + j) + 1]));
            let h = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
            let (ev, _) = eigh(&h);
            let r = realify(&h);
            let re = nalgebra::SymmetricEigen::new(r).eigenvalues;
            let mut got: Vec<f64> = re.iter().copied().collect();
            got.sort_by(f64::total_cmp);
            let mut want: Vec<f64> = ev.iter().flat_map(|&v| [v, v]).collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
