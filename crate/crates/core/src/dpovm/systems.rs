use serde::{Deserialize, Serialize};

use super::Dpovm;
use crate::error::{Error, Result};
use crate::sdp::{check_solution, herm_len, herm_to_vec, vec_to_herm, BlockKind, BlockSpec, ConeProgram, GroupRole, SeparatingFunctional, SolutionCheck, SparseRow};
use crate::tensor_core::{CMat, LabeledOperator, SystemLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Bipartite,
    P2fDefinition1,
    P2fDefinition2,
    Nmdci,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarBlock {
    pub name: String,
    pub labels: Vec<SystemLabel>,
    pub kind: BlockKind,
}

impl VarBlock {
    pub fn dim(&self) -> usize {
        self.labels.iter().map(|l| l.dim).product()
    }
}

/// `coef · Tr_{trace_out}(X_block) ⊗ 1` on the equation's remaining labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub block: usize,
    pub coef: f64,
    pub trace_out: Vec<String>,
}

impl Term {
    pub fn new(block: usize, coef: f64) -> Self {
        Self {
            block,
            coef,
            trace_out: vec![],
        }
    }

    pub fn tracing(mut self, labels: &[SystemLabel]) -> Self {
        self.trace_out = labels.iter().map(|l| l.name.clone()).collect();
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub name: String,
    pub labels: Vec<SystemLabel>,
    pub terms: Vec<Term>,
    pub rhs: LabeledOperator,
    pub role: GroupRole,
}

/// A separability question as PSD variables and linear matrix equations.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalConstraintSystem {
    pub kind: SystemKind,
    pub blocks: Vec<VarBlock>,
    pub equations: Vec<Equation>,
    pub target: Dpovm,
}

struct Builder {
    blocks: Vec<VarBlock>,
    equations: Vec<Equation>,
}

impl Builder {
    fn new() -> Self {
        Self {
            blocks: vec![],
            equations: vec![],
        }
    }

    fn block(&mut self, name: String, labels: &[SystemLabel]) -> usize {
        self.blocks.push(VarBlock {
            name,
            labels: labels.to_vec(),
            kind: BlockKind::Psd,
        });
        self.blocks.len() - 1
    }

    fn zero_eq(&mut self, name: String, labels: &[SystemLabel], terms: Vec<Term>) -> Result<()> {
        let rhs = LabeledOperator::zeros(labels.to_vec())?;
        self.eq(name, labels, terms, rhs, GroupRole::Structural);
        Ok(())
    }

    fn eq(&mut self, name: String, labels: &[SystemLabel], terms: Vec<Term>, rhs: LabeledOperator, role: GroupRole) {
        self.equations.push(Equation {
            name,
            labels: labels.to_vec(),
            terms,
            rhs,
            role,
        });
    }

    fn targets(&mut self, target: &Dpovm, branches: &[Vec<usize>], terms_for: impl Fn(&[usize], usize) -> Vec<Term>) {
        for (i, e) in target.elements().iter().enumerate() {
            let terms = terms_for(&branches.iter().map(|b| b[i]).collect::<Vec<_>>(), i);
            let (x, a) = target.split_index(i);
            self.eq(format!("target x={:?} a={:?}", x, a), target.labels(), terms, e.clone(), GroupRole::Target(i));
        }
    }

    fn finish(self, kind: SystemKind, target: &Dpovm) -> CausalConstraintSystem {
        CausalConstraintSystem {
            kind,
            blocks: self.blocks,
            equations: self.equations,
            target: target.clone(),
        }
    }
}

fn require_singleton_inputs(e: &Dpovm) -> Result<()> {
    if e.parties().iter().any(|p| p.classical_inputs != 1) {
        return Err(Error::Precondition("this system takes a D-POVM without classical inputs".into()));
    }
    Ok(())
}

fn plain_targets(b: &mut Builder, e: &Dpovm, first: &[usize], second: &[usize]) {
    b.targets(e, &[first.to_vec(), second.to_vec()], |blk, _| vec![Term::new(blk[0], 1.0), Term::new(blk[1], 1.0)]);
}

/// Decomposition into an A'≺B' and a B'≺A' branch with subnormalized
/// marginal POVMs; the branch weight is carried by the marginals' traces.
pub fn bipartite_sep_system(e: &Dpovm) -> Result<CausalConstraintSystem> {
    if e.parties().len() != 2 {
        return Err(Error::Precondition(format!("bipartite system needs 2 parties, got {}", e.parties().len())));
    }
    require_singleton_inputs(e)?;
    let la = e.parties()[0].quantum_inputs.clone();
    let lb = e.parties()[1].quantum_inputs.clone();
    if la.is_empty() || lb.is_empty() {
        return Err(Error::Precondition("both parties need quantum inputs".into()));
    }
    let (na, nb) = (e.parties()[0].outcomes, e.parties()[1].outcomes);
    let all = e.labels().to_vec();
    let mut b = Builder::new();
    let mut ab = vec![];
    let mut ba = vec![];
    for a in 0..na {
        for bb in 0..nb {
            ab.push(b.block(format!("AB[a={},b={}]", a, bb), &all));
        }
    }
    for a in 0..na {
        for bb in 0..nb {
            ba.push(b.block(format!("BA[a={},b={}]", a, bb), &all));
        }
    }
    let ma: Vec<usize> = (0..na).map(|a| b.block(format!("A[a={}]", a), &la)).collect();
    let mb: Vec<usize> = (0..nb).map(|x| b.block(format!("B[b={}]", x), &lb)).collect();
    plain_targets(&mut b, e, &ab, &ba);
    for a in 0..na {
        let mut t: Vec<Term> = (0..nb).map(|x| Term::new(ab[a * nb + x], 1.0)).collect();
        t.push(Term::new(ma[a], -1.0));
        b.zero_eq(format!("sum_b AB[a={}]", a), &all, t)?;
    }
    for x in 0..nb {
        let mut t: Vec<Term> = (0..na).map(|a| Term::new(ba[a * nb + x], 1.0)).collect();
        t.push(Term::new(mb[x], -1.0));
        b.zero_eq(format!("sum_a BA[b={}]", x), &all, t)?;
    }
    for (name, marg, labels) in [("A", &ma, &la), ("B", &mb, &lb)] {
        let d: usize = labels.iter().map(|l| l.dim).product();
        let mut t: Vec<Term> = marg.iter().map(|&m| Term::new(m, 1.0)).collect();
        t.extend(marg.iter().map(|&m| Term::new(m, -1.0 / d as f64).tracing(labels)));
        b.zero_eq(format!("{} marginal proportional to identity", name), labels, t)?;
    }
    let da: usize = la.iter().map(|l| l.dim).product();
    let db: usize = lb.iter().map(|l| l.dim).product();
    let mut t: Vec<Term> = ma.iter().map(|&m| Term::new(m, 1.0 / da as f64).tracing(&la)).collect();
    t.extend(mb.iter().map(|&m| Term::new(m, 1.0 / db as f64).tracing(&lb)));
    b.eq("branch weights sum to one".into(), &[], t, LabeledOperator::scalar(1.0.into()), GroupRole::Structural);
    Ok(b.finish(SystemKind::Bipartite, e))
}

fn four_parties(e: &Dpovm) -> Result<()> {
    if e.parties().len() != 4 {
        return Err(Error::Precondition(format!("P+2+F system needs 4 parties, got {}", e.parties().len())));
    }
    Ok(())
}

/// Definition with quantum inputs for all four parties: branches
/// P'≺A'≺B'≺F' and P'≺B'≺A'≺F', each a chain of marginals tensored with
/// identities, closed by `Σ_p (AB_p + BA_p) = 1`.
pub fn p2f_sep_system_def1(e: &Dpovm) -> Result<CausalConstraintSystem> {
    four_parties(e)?;
    require_singleton_inputs(e)?;
    let ls: Vec<Vec<SystemLabel>> = e.parties().iter().map(|p| p.quantum_inputs.clone()).collect();
    if ls.iter().any(|l| l.is_empty()) {
        return Err(Error::Precondition("every party needs a quantum input".into()));
    }
    let cat = |ix: &[usize]| -> Vec<SystemLabel> { ix.iter().flat_map(|&i| ls[i].iter().cloned()).collect() };
    let (lp, lpa, lpb, lpab, all) = (cat(&[0]), cat(&[0, 1]), cat(&[0, 2]), cat(&[0, 1, 2]), cat(&[0, 1, 2, 3]));
    let o = e.outcome_radices();
    let (np, na, nb, nf) = (o[0], o[1], o[2], o[3]);
    let mut b = Builder::new();
    let idx = |p: usize, a: usize, bb: usize, f: usize| ((p * na + a) * nb + bb) * nf + f;
    let top_ab: Vec<usize> = (0..np * na * nb * nf).map(|i| b.block(format!("AB[{}]", i), &all)).collect();
    let top_ba: Vec<usize> = (0..np * na * nb * nf).map(|i| b.block(format!("BA[{}]", i), &all)).collect();
    let ab_pab: Vec<usize> = (0..np * na * nb).map(|i| b.block(format!("AB_pab[{}]", i), &lpab)).collect();
    let ab_pa: Vec<usize> = (0..np * na).map(|i| b.block(format!("AB_pa[{}]", i), &lpa)).collect();
    let ab_p: Vec<usize> = (0..np).map(|i| b.block(format!("AB_p[{}]", i), &lp)).collect();
    let ba_pab: Vec<usize> = (0..np * na * nb).map(|i| b.block(format!("BA_pab[{}]", i), &lpab)).collect();
    let ba_pb: Vec<usize> = (0..np * nb).map(|i| b.block(format!("BA_pb[{}]", i), &lpb)).collect();
    let ba_p: Vec<usize> = (0..np).map(|i| b.block(format!("BA_p[{}]", i), &lp)).collect();
    plain_targets(&mut b, e, &top_ab, &top_ba);
    for p in 0..np {
        for a in 0..na {
            for bb in 0..nb {
                let k = (p * na + a) * nb + bb;
                for (top, low, tag) in [(&top_ab, &ab_pab, "AB"), (&top_ba, &ba_pab, "BA")] {
                    let mut t: Vec<Term> = (0..nf).map(|f| Term::new(top[idx(p, a, bb, f)], 1.0)).collect();
                    t.push(Term::new(low[k], -1.0));
                    b.zero_eq(format!("sum_f {}[p={},a={},b={}]", tag, p, a, bb), &all, t)?;
                }
            }
            let mut t: Vec<Term> = (0..nb).map(|bb| Term::new(ab_pab[(p * na + a) * nb + bb], 1.0)).collect();
            t.push(Term::new(ab_pa[p * na + a], -1.0));
            b.zero_eq(format!("sum_b AB[p={},a={}]", p, a), &lpab, t)?;
        }
        for bb in 0..nb {
            let mut t: Vec<Term> = (0..na).map(|a| Term::new(ba_pab[(p * na + a) * nb + bb], 1.0)).collect();
            t.push(Term::new(ba_pb[p * nb + bb], -1.0));
            b.zero_eq(format!("sum_a BA[p={},b={}]", p, bb), &lpab, t)?;
        }
        let mut t: Vec<Term> = (0..na).map(|a| Term::new(ab_pa[p * na + a], 1.0)).collect();
        t.push(Term::new(ab_p[p], -1.0));
        b.zero_eq(format!("sum_a AB[p={}]", p), &lpa, t)?;
        let mut t: Vec<Term> = (0..nb).map(|bb| Term::new(ba_pb[p * nb + bb], 1.0)).collect();
        t.push(Term::new(ba_p[p], -1.0));
        b.zero_eq(format!("sum_b BA[p={}]", p), &lpb, t)?;
    }
    let t: Vec<Term> = ab_p.iter().chain(&ba_p).map(|&k| Term::new(k, 1.0)).collect();
    b.eq("closing".into(), &lp, t, LabeledOperator::identity(lp.clone())?, GroupRole::Structural);
    Ok(b.finish(SystemKind::P2fDefinition1, e))
}

/// Definition for families with a quantum input at P only and classical
/// inputs z, w, v for A, B, F. Marginals that must not depend on later
/// inputs are single variables shared across those inputs.
pub fn p2f_sep_system_def2(e: &Dpovm) -> Result<CausalConstraintSystem> {
    four_parties(e)?;
    let parties = e.parties();
    if parties[0].quantum_inputs.is_empty() || parties[1..].iter().any(|p| !p.quantum_inputs.is_empty()) {
        return Err(Error::Precondition("only the first party may (and must) have a quantum input".into()));
    }
    if parties[0].classical_inputs != 1 {
        return Err(Error::Precondition("the first party takes no classical input".into()));
    }
    let lp = parties[0].quantum_inputs.clone();
    let o = e.outcome_radices();
    let (np, na, nb, nf) = (o[0], o[1], o[2], o[3]);
    let (nz, nw, nv) = (parties[1].classical_inputs, parties[2].classical_inputs, parties[3].classical_inputs);
    let mut b = Builder::new();
    let n_el = e.elements().len();
    let top_ab: Vec<usize> = (0..n_el).map(|i| b.block(format!("AB[{}]", i), &lp)).collect();
    let top_ba: Vec<usize> = (0..n_el).map(|i| b.block(format!("BA[{}]", i), &lp)).collect();
    let mid = |z: usize, w: usize, p: usize, a: usize, bb: usize| (((z * nw + w) * np + p) * na + a) * nb + bb;
    let mid_ab: Vec<usize> = (0..nz * nw * np * na * nb).map(|i| b.block(format!("AB_pab|zw[{}]", i), &lp)).collect();
    let mid_ba: Vec<usize> = (0..nz * nw * np * na * nb).map(|i| b.block(format!("BA_pab|zw[{}]", i), &lp)).collect();
    let m_a: Vec<usize> = (0..nz * np * na).map(|i| b.block(format!("A_pa|z[{}]", i), &lp)).collect();
    let m_b: Vec<usize> = (0..nw * np * nb).map(|i| b.block(format!("B_pb|w[{}]", i), &lp)).collect();
    let ab_p: Vec<usize> = (0..np).map(|p| b.block(format!("AB_p[{}]", p), &lp)).collect();
    let ba_p: Vec<usize> = (0..np).map(|p| b.block(format!("BA_p[{}]", p), &lp)).collect();
    plain_targets(&mut b, e, &top_ab, &top_ba);
    for z in 0..nz {
        for w in 0..nw {
            for p in 0..np {
                for a in 0..na {
                    for bb in 0..nb {
                        for v in 0..nv {
                            for (top, low, tag) in [(&top_ab, &mid_ab, "AB"), (&top_ba, &mid_ba, "BA")] {
                                let mut t: Vec<Term> = (0..nf)
                                    .map(|f| Term::new(top[e.index(&[0, z, w, v], &[p, a, bb, f])], 1.0))
                                    .collect();
                                t.push(Term::new(low[mid(z, w, p, a, bb)], -1.0));
                                b.zero_eq(format!("sum_f {}[z={},w={},v={},p={},a={},b={}]", tag, z, w, v, p, a, bb), &lp, t)?;
                            }
                        }
                    }
                    let mut t: Vec<Term> = (0..nb).map(|bb| Term::new(mid_ab[mid(z, w, p, a, bb)], 1.0)).collect();
                    t.push(Term::new(m_a[(z * np + p) * na + a], -1.0));
                    b.zero_eq(format!("sum_b AB[z={},w={},p={},a={}]", z, w, p, a), &lp, t)?;
                }
                for bb in 0..nb {
                    let mut t: Vec<Term> = (0..na).map(|a| Term::new(mid_ba[mid(z, w, p, a, bb)], 1.0)).collect();
                    t.push(Term::new(m_b[(w * np + p) * nb + bb], -1.0));
                    b.zero_eq(format!("sum_a BA[z={},w={},p={},b={}]", z, w, p, bb), &lp, t)?;
                }
            }
        }
    }
    for p in 0..np {
        for z in 0..nz {
            let mut t: Vec<Term> = (0..na).map(|a| Term::new(m_a[(z * np + p) * na + a], 1.0)).collect();
            t.push(Term::new(ab_p[p], -1.0));
            b.zero_eq(format!("sum_a A[z={},p={}]", z, p), &lp, t)?;
        }
        for w in 0..nw {
            let mut t: Vec<Term> = (0..nb).map(|bb| Term::new(m_b[(w * np + p) * nb + bb], 1.0)).collect();
            t.push(Term::new(ba_p[p], -1.0));
            b.zero_eq(format!("sum_b B[w={},p={}]", w, p), &lp, t)?;
        }
    }
    let t: Vec<Term> = ab_p.iter().chain(&ba_p).map(|&k| Term::new(k, 1.0)).collect();
    b.eq("closing".into(), &lp, t, LabeledOperator::identity(lp.clone())?, GroupRole::Structural);
    Ok(b.finish(SystemKind::P2fDefinition2, e))
}

/// `E_ab = X_ab ⊗ 1^{B_O} + Y_ab ⊗ 1^{A_O}` with `Σ X` and `Σ Y` proportional
/// to the identity. Each party's quantum inputs are (input, output).
pub fn nmdci_sep_system(e: &Dpovm) -> Result<CausalConstraintSystem> {
    if e.parties().len() != 2 || e.parties().iter().any(|p| p.quantum_inputs.len() != 2) {
        return Err(Error::Precondition("N-MDCI system needs two parties with (input, output) labels each".into()));
    }
    require_singleton_inputs(e)?;
    let (ai, ao) = (e.parties()[0].quantum_inputs[0].clone(), e.parties()[0].quantum_inputs[1].clone());
    let (bi, bo) = (e.parties()[1].quantum_inputs[0].clone(), e.parties()[1].quantum_inputs[1].clone());
    let lx = vec![ai.clone(), ao, bi.clone()];
    let ly = vec![ai, bi, bo];
    let n = e.outcome_count();
    let mut b = Builder::new();
    let xs: Vec<usize> = (0..n).map(|i| b.block(format!("X[{}]", i), &lx)).collect();
    let ys: Vec<usize> = (0..n).map(|i| b.block(format!("Y[{}]", i), &ly)).collect();
    plain_targets(&mut b, e, &xs, &ys);
    for (tag, blocks, labels) in [("X", &xs, &lx), ("Y", &ys, &ly)] {
        let d: usize = labels.iter().map(|l| l.dim).product();
        let mut t: Vec<Term> = blocks.iter().map(|&k| Term::new(k, 1.0)).collect();
        t.extend(blocks.iter().map(|&k| Term::new(k, -1.0 / d as f64).tracing(labels)));
        b.zero_eq(format!("sum {} proportional to identity", tag), labels, t)?;
    }
    Ok(b.finish(SystemKind::Nmdci, e))
}

/// Hermitian basis element `k` of dimension `d`.
fn basis_element(k: usize, d: usize) -> CMat {
    let mut v = vec![0.0; herm_len(d)];
    v[k] = 1.0;
    vec_to_herm(&v, d)
}

impl CausalConstraintSystem {
    pub fn build(kind: SystemKind, e: &Dpovm) -> Result<Self> {
        match kind {
            SystemKind::Bipartite => bipartite_sep_system(e),
            SystemKind::P2fDefinition1 => p2f_sep_system_def1(e),
            SystemKind::P2fDefinition2 => p2f_sep_system_def2(e),
            SystemKind::Nmdci => nmdci_sep_system(e),
        }
    }

    fn check_term(&self, eq: &Equation, t: &Term) -> Result<()> {
        let blk = self
            .blocks
            .get(t.block)
            .ok_or_else(|| Error::Shape(format!("equation `{}` references block {}", eq.name, t.block)))?;
        for l in &blk.labels {
            if t.trace_out.contains(&l.name) {
                continue;
            }
            match eq.labels.iter().find(|e| e.name == l.name) {
                Some(e) if e.dim == l.dim => {}
                _ => return Err(Error::Shape(format!("block `{}` label {} is not in equation `{}`", blk.name, l, eq.name))),
            }
        }
        for n in &t.trace_out {
            if !blk.labels.iter().any(|l| &l.name == n) {
                return Err(Error::UnknownLabel(n.clone()));
            }
        }
        Ok(())
    }

    /// Adjoint of a term: equation-space operator to block-space operator.
    fn term_adjoint(&self, eq: &Equation, t: &Term, g: &LabeledOperator) -> Result<LabeledOperator> {
        let blk = &self.blocks[t.block];
        let kept: Vec<&str> = blk.labels.iter().filter(|l| !t.trace_out.contains(&l.name)).map(|l| l.name.as_str()).collect();
        let missing: Vec<&str> = eq.labels.iter().filter(|l| !kept.contains(&l.name.as_str())).map(|l| l.name.as_str()).collect();
        let reduced = g.partial_trace(&missing)?;
        let traced: Vec<SystemLabel> = blk.labels.iter().filter(|l| t.trace_out.contains(&l.name)).cloned().collect();
        let full = reduced.extend_identity(&traced)?;
        let order: Vec<&str> = blk.labels.iter().map(|l| l.name.as_str()).collect();
        Ok(full.permuted(&order)?.scale(t.coef))
    }

    /// Whether every block is dominated by the identity at feasible points.
    fn bounded(&self) -> bool {
        self.target.is_valid().unwrap_or(false)
    }

    pub fn to_program(&self) -> Result<ConeProgram> {
        let mut p = ConeProgram::new();
        let bounded = self.bounded();
        for blk in &self.blocks {
            let d = blk.dim();
            p.add_block(BlockSpec {
                name: blk.name.clone(),
                dim: d,
                kind: blk.kind,
                trace_bound: (bounded && blk.kind == BlockKind::Psd).then_some(d as f64 * (1.0 + 1e-8)),
            });
        }
        for eq in &self.equations {
            let d: usize = eq.labels.iter().map(|l| l.dim).product();
            for t in &eq.terms {
                self.check_term(eq, t)?;
            }
            let order: Vec<&str> = eq.labels.iter().map(|l| l.name.as_str()).collect();
            let rhs = eq.rhs.permuted(&order)?;
            let mut rows: Vec<SparseRow> = Vec::with_capacity(herm_len(d));
            for k in 0..herm_len(d) {
                let g = LabeledOperator::new(eq.labels.clone(), basis_element(k, d))?;
                let mut row: SparseRow = Vec::new();
                for t in &eq.terms {
                    let adj = self.term_adjoint(eq, t, &g)?;
                    let start = p.block_range(t.block).start;
                    for (i, c) in herm_to_vec(adj.matrix()).into_iter().enumerate() {
                        if c.abs() > 1e-15 {
                            row.push((start + i, c));
                        }
                    }
                }
                row.sort_by_key(|e| e.0);
                let mut merged: SparseRow = Vec::with_capacity(row.len());
                for (v, c) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == v => last.1 += c,
                        _ => merged.push((v, c)),
                    }
                }
                merged.retain(|e| e.1 != 0.0);
                rows.push(merged);
            }
            p.add_group(&eq.name, eq.role, rows, rhs.into_matrix())?;
        }
        Ok(p)
    }

    pub fn block_operators(&self, blocks: &[CMat]) -> Result<Vec<LabeledOperator>> {
        self.blocks
            .iter()
            .zip(blocks)
            .map(|(b, m)| LabeledOperator::new(b.labels.clone(), m.clone()))
            .collect()
    }

    /// Independent re-evaluation of a block assignment.
    pub fn check(&self, blocks: &[CMat]) -> Result<SolutionCheck> {
        check_solution(&self.to_program()?, blocks)
    }

    /// Witness operators in link-product convention: `S_i * E_i = Tr(S'_i E_i)`.
    pub fn witness_operators(&self, s: &SeparatingFunctional) -> Result<Vec<LabeledOperator>> {
        if s.coefficients.len() != self.target.elements().len() {
            return Err(Error::Shape("functional does not match the target".into()));
        }
        s.coefficients
            .iter()
            .map(|c| LabeledOperator::new(self.target.labels().to_vec(), c.transpose()))
            .collect()
    }

    /// Same system with a different target of identical shape.
    pub fn with_target(&self, target: &Dpovm) -> Result<Self> {
        if target.parties() != self.target.parties() {
            return Err(Error::Shape("replacement target has a different shape".into()));
        }
        let mut out = self.clone();
        for eq in &mut out.equations {
            if let GroupRole::Target(i) = eq.role {
                eq.rhs = target.elements()[i].clone();
            }
        }
        out.target = target.clone();
        Ok(out)
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpovm::{induce_dpovm, DpovmParty};
    use crate::process::{build_quantum_switch, depolarize, switch_instruments};
    use crate::sdp::{extract_witness, solve_feasibility, verify_witness, SolveOptions, SolveStatus};
    use crate::tensor_core::{pauli_tomographic_set, C64};

    fn q(n: &str) -> SystemLabel {
        SystemLabel::new(n, 2)
    }

    fn product_dpovm() -> Dpovm {
        let fa = pauli_tomographic_set(1, "A'").unwrap();
        let fb = pauli_tomographic_set(1, "B'").unwrap();
        let mut el = vec![];
        for a in 0..2 {
            for b in 0..2 {
                el.push(fa.element(1, a).tensor(fb.element(2, b)).unwrap());
            }
        }
        let parties = vec![
            DpovmParty {
                name: "A".into(),
                quantum_inputs: vec![q("A'")],
                classical_inputs: 1,
                outcomes: 2,
            },
            DpovmParty {
                name: "B".into(),
                quantum_inputs: vec![q("B'")],
                classical_inputs: 1,
                outcomes: 2,
            },
        ];
        Dpovm::new(parties, el).unwrap()
    }

    #[test]
    fn bipartite_audit_counts() {
        let s = bipartite_sep_system(&product_dpovm()).unwrap();
        let mut dims = s.block_dims();
        dims.sort_unstable();
        assert_eq!(dims, vec![2, 2, 2, 2, 4, 4, 4, 4, 4, 4, 4, 4]);
    }

    #[test]
    fn product_dpovm_is_separable() {
        let s = bipartite_sep_system(&product_dpovm()).unwrap();
        let p = s.to_program().unwrap();
        let r = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Feasible);
        let chk = s.check(r.solution.as_ref().unwrap()).unwrap();
        assert!(chk.passes(1e-7));
    }

    fn switch_family(r: f64) -> Dpovm {
        let w = depolarize(&build_quantum_switch().unwrap(), r).unwrap();
        induce_dpovm(&w, &switch_instruments().unwrap()).unwrap()
    }

    #[test]
    fn def2_program_shape() {
        let s = p2f_sep_system_def2(&switch_family(0.0)).unwrap();
        let p = s.to_program().unwrap();
        assert_eq!(p.num_vars(), 424);
        assert_eq!(p.num_rows(), 340);
    }

    #[test]
    fn switch_is_nonseparable_at_zero_noise() {
        let s = p2f_sep_system_def2(&switch_family(0.0)).unwrap();
        let p = s.to_program().unwrap();
        let opts = SolveOptions::default();
        let r = solve_feasibility(&p, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::InfeasibleWithCertificate);
        let w = extract_witness(&p, &r, &opts).unwrap();
        assert!(w.certified_margin > 0.0);
        assert!(verify_witness(&w, &p, &opts).unwrap().passed);
    }

    #[test]
    fn switch_is_separable_at_point_seven() {
        let s = p2f_sep_system_def2(&switch_family(0.7)).unwrap();
        let r = solve_feasibility(&s.to_program().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Feasible);
    }

    #[test]
    fn arity_errors() {
        assert!(bipartite_sep_system(&switch_family(0.0)).is_err());
        assert!(p2f_sep_system_def2(&product_dpovm()).is_err());
        assert!(p2f_sep_system_def1(&switch_family(0.0)).is_err());
        assert!(nmdci_sep_system(&product_dpovm()).is_err());
    }

    fn one_outcome(names: &[&str], labels: Vec<SystemLabel>, el: LabeledOperator) -> Dpovm {
        let mut parties = vec![];
        for n in names {
            let ql = labels.iter().filter(|l| l.name.starts_with(n)).cloned().collect();
            parties.push(DpovmParty {
                name: n.to_string(),
                quantum_inputs: ql,
                classical_inputs: 1,
                outcomes: 1,
            });
        }
        Dpovm::new(parties, vec![el]).unwrap()
    }

    fn four_products() -> Dpovm {
        let names = ["P", "A", "B", "F"];
        let fams: Vec<_> = names.iter().map(|n| pauli_tomographic_set(1, &format!("{}'", n)).unwrap()).collect();
        let mut el = vec![];
        for i in 0..16 {
            let bits = [i >> 3 & 1, i >> 2 & 1, i >> 1 & 1, i & 1];
            let mut op = fams[0].element(0, bits[0]).clone();
            for k in 1..4 {
                op = op.tensor(fams[k].element(k % 3, bits[k])).unwrap();
            }
            el.push(op);
        }
        let parties = names
            .iter()
            .map(|n| DpovmParty {
                name: n.to_string(),
                quantum_inputs: vec![q(&format!("{}'", n))],
                classical_inputs: 1,
                outcomes: 2,
            })
            .collect();
        Dpovm::new(parties, el).unwrap()
    }

    #[test]
    fn def1_product_is_separable() {
        let s = p2f_sep_system_def1(&four_products()).unwrap();
        assert!(s.block_dims().iter().filter(|&&d| d == 16).count() == 32);
        let r = solve_feasibility(&s.to_program().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Feasible);
    }

    #[test]
    fn def1_rejects_entanglement_with_final_party() {
        let labels = vec![q("P'"), q("A'"), q("B'"), q("F'")];
        let phi = crate::tensor_core::maximally_entangled(q("P'"), q("F'")).unwrap().scale(2.0);
        let el = phi.tensor(&LabeledOperator::identity(vec![q("A'"), q("B'")]).unwrap()).unwrap();
        let e = one_outcome(&["P", "A", "B", "F"], labels, el);
        let r = solve_feasibility(&p2f_sep_system_def1(&e).unwrap().to_program().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::InfeasibleWithCertificate);
    }

    fn nmdci_labels() -> Vec<SystemLabel> {
        vec![q("A'I"), q("A'O"), q("B'I"), q("B'O")]
    }

    #[test]
    fn nmdci_product_is_feasible() {
        let fa = pauli_tomographic_set(1, "A'I").unwrap();
        let fb = pauli_tomographic_set(1, "B'I").unwrap();
        let rest = LabeledOperator::identity(vec![q("A'O"), q("B'O")]).unwrap().scale(0.25);
        let mut el = vec![];
        for a in 0..2 {
            for b in 0..2 {
                el.push(fa.element(0, a).tensor(fb.element(1, b)).unwrap().tensor(&rest).unwrap());
            }
        }
        let parties = ["A", "B"]
            .iter()
            .map(|n| DpovmParty {
                name: n.to_string(),
                quantum_inputs: vec![q(&format!("{}'I", n)), q(&format!("{}'O", n))],
                classical_inputs: 1,
                outcomes: 2,
            })
            .collect();
        let s = nmdci_sep_system(&Dpovm::new(parties, el).unwrap()).unwrap();
        let r = solve_feasibility(&s.to_program().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Feasible);
        assert!(s.check(r.solution.as_ref().unwrap()).unwrap().passes(1e-6));
    }

    #[test]
    fn nmdci_rejects_output_projector() {
        let el = LabeledOperator::identity(vec![q("A'I"), q("B'I")])
            .unwrap()
            .tensor(&LabeledOperator::basis_projector(q("A'O"), 0).unwrap())
            .unwrap()
            .tensor(&LabeledOperator::basis_projector(q("B'O"), 0).unwrap())
            .unwrap();
        let e = one_outcome(&["A", "B"], nmdci_labels(), el);
        let r = solve_feasibility(&nmdci_sep_system(&e).unwrap().to_program().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::InfeasibleWithCertificate);
    }

    #[test]
    fn witness_operators_are_transposed_coefficients() {
        let s = bipartite_sep_system(&product_dpovm()).unwrap();
        let mut w = SeparatingFunctional {
            coefficients: vec![CMat::zeros(4, 4); 4],
            offset: 0.0,
            lower_bound: 0.0,
            pairing: 0.0,
            certified_margin: 0.0,
        };
        w.coefficients[1][(0, 1)] = C64::new(0.0, 1.0);
        w.coefficients[1][(1, 0)] = C64::new(0.0, -1.0);
        let ops = s.witness_operators(&w).unwrap();
        assert_eq!(ops[1].matrix()[(1, 0)], C64::new(0.0, 1.0));
    }
}
