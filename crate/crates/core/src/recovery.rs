//! Recovery channels for Gibbs states: the Petz map, the belief-propagation
//! recovery map and its normalized instrument, the repeat-until-success
//! assembly, conditional mutual information decay, depth-two preparation and
//! the recovered states used for local Gibbs reconstruction on rings.

use serde::Serialize;

use crate::beliefprop;
use crate::error::{domain, Error, Result};
use crate::hilbert::{
    channel_apply, fidelity, psd_power, support_projector, trace_distance, Channel, ChannelReport, DensityMatrix, MatFn,
    Operator, Register, SiteSet, Support, CHOI_CAP,
};
use crate::info::{self, EntropyCache};
use crate::linalg;
use crate::thermal::{self, Hamiltonian};

/// One inequality from a proof, evaluated on concrete numbers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl LedgerEntry {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, satisfied: lhs <= rhs }
    }
}

fn register(op: &Operator, sites: &SiteSet) -> Result<Register> {
    Register::new(sites.clone(), op.dims_of(sites)?)
}

fn maximally_mixed(reg: &Register) -> DensityMatrix {
    DensityMatrix::maximally_mixed(reg.sites.clone(), reg.dims.clone())
}

/// Petz map `X_B ↦ ρ_BC^{1/2}(ρ_B^{−1/2} X_B ρ_B^{−1/2} ⊗ 1_C)ρ_BC^{1/2}` for a reference on `BC`.
///
/// When `ρ_B` is rank deficient the kernel of `ρ_B` is sent to
/// `P⊥ X P⊥ ⊗ τ_C` with `τ_C` maximally mixed, so the channel stays trace preserving.
pub fn petz_recovery(rho_ref: &DensityMatrix, b: &SiteSet) -> Result<Channel> {
    if !b.is_subset(rho_ref.sites()) || b.is_empty() {
        return domain(format!("{b} is not a non-empty part of the reference support {}", rho_ref.sites()));
    }
    let c = rho_ref.sites().difference(b);
    if c.is_empty() {
        return Ok(Channel::identity(Register::of(rho_ref.op())));
    }
    let reg_b = register(rho_ref.op(), b)?;
    let reg_c = register(rho_ref.op(), &c)?;
    let rho_b = rho_ref.reduce(b)?;
    let inv_sqrt = psd_power(rho_b.op(), -0.5)?;
    let sqrt_bc = psd_power(rho_ref.op(), 0.5)?;
    let dc = reg_c.dim() as f64;
    let main = Channel::compose(vec![
        Channel::conjugation(reg_b.clone(), inv_sqrt.into_matrix())?,
        Channel::append(maximally_mixed(&reg_c)),
        Channel::conjugation(Register::of(rho_ref.op()), linalg::scale(sqrt_bc.as_ref(), dc.sqrt()))?,
    ])?;
    let proj = support_projector(rho_b.op())?;
    let kernel = Operator::identity(reg_b.sites.clone(), reg_b.dims.clone()).sub(&proj)?;
    if kernel.op_norm()? < 0.5 {
        return Ok(main);
    }
    let fill = Channel::compose(vec![
        Channel::conjugation(reg_b, kernel.into_matrix())?,
        Channel::append(maximally_mixed(&reg_c)),
    ])?;
    Channel::sum(vec![main, fill])
}

/// Distance and fidelity between a target state and a recovered output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecoveryMetrics {
    pub trace_distance: f64,
    pub fidelity: f64,
    /// `−2 ln F`.
    pub neg_log_fidelity: f64,
}

/// Compares a recovered (normalized) output against the target.
pub fn recovery_metrics(target: &DensityMatrix, out: &Operator) -> Result<RecoveryMetrics> {
    let out = DensityMatrix::from_operator_unchecked(out.clone());
    let td = trace_distance(target, &out)?;
    let f = fidelity(target, &out)?;
    Ok(RecoveryMetrics { trace_distance: td, fidelity: f, neg_log_fidelity: -2.0 * f.ln() })
}

/// The belief-propagation recovery map `κ_{B→BC}` and its ingredients.
#[derive(Clone, Debug)]
pub struct Kappa {
    /// `σ_B ↦ O_B[Tr_{B^R}(Õ_B σ_B Õ_B†) ⊗ ρ^{H_{B^RC}}]O_B†`.
    pub channel: Channel,
    pub o_b: Operator,
    pub o_inv_b: Operator,
    /// `ρ^{H_{B^RC}}`.
    pub rho_right: DensityMatrix,
    pub a: SiteSet,
    pub b: SiteSet,
    pub c: SiteSet,
    pub b_left: SiteSet,
    pub b_right: SiteSet,
    /// `λ_max(O_B†O_B)·λ_max(Õ_B†Õ_B)`.
    pub lambda_max: f64,
    pub flow_steps: usize,
}

/// Builds `κ_{B→BC}` from the flow of `H_{AB^L} + H_{B^RC} + sH_{B^M}` localized on `B`.
pub fn bp_recovery_kappa(h: &Hamiltonian, beta: f64, a: &SiteSet, b: &SiteSet, c: &SiteSet, ode_tol: f64) -> Result<Kappa> {
    let geom = h.geometry();
    for s in [a, b, c] {
        geom.check(s)?;
    }
    if !a.is_disjoint(b) || !a.is_disjoint(c) || !b.is_disjoint(c) {
        return domain("A, B and C must be disjoint");
    }
    if a.is_empty() || c.is_empty() {
        return domain("A and C must be non-empty");
    }
    if b.len() < 2 || !geom.is_contiguous(b) {
        return domain(format!("B = {b} must be contiguous with at least two sites"));
    }
    let abc = a.union(b).union(c);
    let split = thermal::split_middle_interaction(h, b)?;
    let (left, right) = orient(geom, a, &split.left, &split.right);
    let al = a.union(&left);
    let rc = right.union(c);
    let mut rest = Vec::new();
    for k in h.terms_inside(&abc) {
        if split.terms.contains(&k) {
            continue;
        }
        let s = &h.terms()[k].sites;
        if !(s.is_subset(&al) || s.is_subset(&rc)) {
            return domain(format!("term on {s} couples A to C around B; B must shield A from C"));
        }
        rest.push(k);
    }
    let h0 = h.assemble_terms(&rest, &abc)?;
    let v = h.assemble_terms(&split.terms, &split.h_middle.sites().clone())?;
    let flow = beliefprop::local_flow(&h0, &v, beta, b, ode_tol)?;
    let rho_right = thermal::gibbs_on(h, &rc, beta)?.state;
    let reg_b = register(&h0, b)?;
    let reg_r = register(&h0, &right)?;
    let channel = Channel::compose(vec![
        Channel::conjugation(reg_b.clone(), flow.o_inv.matrix().clone())?,
        Channel::trace_out(reg_r),
        Channel::append(rho_right.clone()),
        Channel::conjugation(reg_b, flow.o.matrix().clone())?,
    ])?;
    let lambda_max = linalg::max_gram_eigenvalue(flow.o.as_ref())? * linalg::max_gram_eigenvalue(flow.o_inv.as_ref())?;
    Ok(Kappa {
        channel,
        o_b: flow.o,
        o_inv_b: flow.o_inv,
        rho_right,
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
        b_left: left,
        b_right: right,
        lambda_max,
        flow_steps: flow.steps,
    })
}

/// Names the halves so that `left` faces `A`.
fn orient(geom: &crate::hilbert::ChainGeometry, a: &SiteSet, l: &SiteSet, r: &SiteSet) -> (SiteSet, SiteSet) {
    if geom.set_distance(a, l) <= geom.set_distance(a, r) {
        (l.clone(), r.clone())
    } else {
        (r.clone(), l.clone())
    }
}

/// Success/failure instrument built from `κ`.
#[derive(Clone, Debug)]
pub struct RecoveryInstrument {
    /// `κ / λ_max`, CP and trace non-increasing.
    pub success: Channel,
    /// `σ ↦ √(1−N) σ √(1−N) ⊗ τ_C` with `N` the success effect.
    pub fail: Channel,
    pub p_success: f64,
    pub lambda_max: f64,
    /// Validation of `success + fail`.
    pub report: ChannelReport,
    /// Smallest Choi eigenvalue of the literal completion `τ − Λ̃` (trace-and-replace
    /// by the maximally mixed state minus the success map), when small enough to form.
    pub literal_completion_choi_min: Option<f64>,
}

impl RecoveryInstrument {
    /// `success + fail`, a CPTP map.
    pub fn total(&self) -> Result<Channel> {
        Channel::sum(vec![self.success.clone(), self.fail.clone()])
    }
}

/// Normalizes `κ` into a success branch and completes it into an instrument.
/// `p_success` is evaluated on `rho_ab`.
pub fn normalize_instrument(kappa: &Kappa, rho_ab: &DensityMatrix) -> Result<RecoveryInstrument> {
    if !(kappa.lambda_max > 0.0) {
        return Err(Error::Solver(format!("λ_max = {} is not positive", kappa.lambda_max)));
    }
    let success = kappa.channel.clone().scaled(1.0 / kappa.lambda_max)?;
    let n_eff = success.effect()?.hermitian()?;
    let reg_b = Register::of(&n_eff);
    let one_minus = reg_b.identity().sub(&n_eff)?;
    let root = crate::hilbert::hermitian_fn(&clamp_psd(&one_minus)?, MatFn::Sqrt, 1.0, Support::Pseudo)?;
    let reg_c = register(kappa.rho_right.op(), &kappa.c)?;
    let fail = Channel::compose(vec![
        Channel::conjugation(reg_b.clone(), root.into_matrix())?,
        Channel::append(maximally_mixed(&reg_c)),
    ])?;
    let total = Channel::sum(vec![success.clone(), fail.clone()])?;
    let report = total.validate()?;
    let p_success = channel_apply(&success, rho_ab)?.trace().re;
    let literal_completion_choi_min = if success.input().dim() * success.output().dim() <= CHOI_CAP {
        let out = success.output().clone();
        let replace = Channel::replace(success.input().clone(), maximally_mixed(&out))?;
        let diff = replace.choi()? - success.choi()?;
        Some(linalg::eigvalsh(linalg::hermitian_part(diff.as_ref()).as_ref())?[0])
    } else {
        None
    };
    Ok(RecoveryInstrument { success, fail, p_success, lambda_max: kappa.lambda_max, report, literal_completion_choi_min })
}

/// Removes negative rounding noise from a nearly PSD operator.
fn clamp_psd(op: &Operator) -> Result<Operator> {
    let e = linalg::eigh(op.as_ref())?;
    op.with_matrix(e.map(|x| x.max(0.0)))
}

/// Block sizes of the repeat-until-success layout `B = B_l B̄_{l−1} B_{l−1} … B̄_1 B_1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RusLayout {
    pub stages: usize,
    /// `|B_i|`.
    pub block: usize,
    /// `|B̄_i|`.
    pub buffer: usize,
}

impl RusLayout {
    /// `|B_i| = 2l`, `|B̄_i| = l`, so `|B| = 3l² − l`.
    pub fn standard(l: usize) -> Self {
        Self { stages: l, block: 2 * l, buffer: l }
    }

    pub fn b_len(&self) -> usize {
        self.stages * self.block + self.stages.saturating_sub(1) * self.buffer
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecoveryOptions {
    pub ode_tol: f64,
    pub seed: u64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { ode_tol: 1e-8, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct RusStage {
    /// `B_i`.
    pub block: SiteSet,
    /// `B̄_i`, between `B_{i+1}` and `B_i`; absent for the last stage.
    pub buffer: Option<SiteSet>,
    pub instrument: RecoveryInstrument,
    /// `‖ρ − Λ̃_i(ρ_{AB_l…B_i})/p_i‖₁`.
    pub normalized_err: f64,
}

#[derive(Clone, Debug)]
pub struct RusPlan {
    pub layout: RusLayout,
    /// Stages in application order, `B_1` (next to `C`) first.
    pub stages: Vec<RusStage>,
    pub channel: Channel,
    pub report: ChannelReport,
    /// `‖ρ − Λ(ρ_AB)‖₁`.
    pub error: f64,
    /// Sum of weighted stage errors, final-failure error and correlation bounds.
    pub bound: f64,
    pub ledger: Vec<LedgerEntry>,
}

fn ordered_from_a(geom: &crate::hilbert::ChainGeometry, a: &SiteSet, b: &SiteSet) -> Result<Vec<usize>> {
    let mut order = geom.walk_order(b)?;
    let first = SiteSet::single(order[0]);
    let last = SiteSet::single(*order.last().unwrap());
    if geom.set_distance(a, &first) > geom.set_distance(a, &last) {
        order.reverse();
    }
    Ok(order)
}

/// Assembles `Λ = Λ̃_1 + (Λ̃_2 + … (Λ̃_l + Ẽ_l)Tr_{l−1}Ẽ_{l−1} …)Tr_1Ẽ_1`.
pub fn rus_recovery(
    h: &Hamiltonian,
    beta: f64,
    a: &SiteSet,
    b: &SiteSet,
    c: &SiteSet,
    layout: RusLayout,
    opts: RecoveryOptions,
) -> Result<RusPlan> {
    let geom = h.geometry();
    if layout.stages == 0 || layout.block < 2 {
        return domain("the layout needs at least one stage with blocks of two or more sites");
    }
    if b.len() != layout.b_len() {
        return domain(format!("|B| = {} but the layout needs {}", b.len(), layout.b_len()));
    }
    if !geom.is_contiguous(b) {
        return domain(format!("B = {b} must be contiguous"));
    }
    let order = ordered_from_a(geom, a, b)?;
    // Walk from the C side: B_1, B̄_1, B_2, …
    let rev: Vec<usize> = order.iter().rev().copied().collect();
    let mut blocks = Vec::new();
    let mut buffers = Vec::new();
    let mut pos = 0;
    for i in 0..layout.stages {
        blocks.push(rev[pos..pos + layout.block].iter().copied().collect::<SiteSet>());
        pos += layout.block;
        if i + 1 < layout.stages {
            buffers.push(rev[pos..pos + layout.buffer].iter().copied().collect::<SiteSet>());
            pos += layout.buffer;
        }
    }
    let abc = a.union(b).union(c);
    let rho = thermal::gibbs_on(h, &abc, beta)?.state;
    let all_b = b.clone();
    let mut stages = Vec::with_capacity(layout.stages);
    let mut inputs = Vec::with_capacity(layout.stages);
    for (i, blk) in blocks.iter().enumerate() {
        // Everything on the C side of B_i becomes this stage's C.
        let mut ci = c.clone();
        for j in 0..i {
            ci = ci.union(&blocks[j]).union(&buffers[j]);
        }
        let ai = abc.difference(&ci).difference(blk);
        let kappa = bp_recovery_kappa(h, beta, &ai, blk, &ci, opts.ode_tol)?;
        let input = rho.reduce(&ai.union(blk))?;
        let instrument = normalize_instrument(&kappa, &input)?;
        let out = channel_apply(&instrument.success, &input)?;
        let normalized_err = rho.op().sub(&out.scale(1.0 / instrument.p_success))?.trace_norm()?;
        stages.push(RusStage { block: blk.clone(), buffer: buffers.get(i).cloned(), instrument, normalized_err });
        inputs.push((ai, ci, input));
    }
    // Assemble from the last stage outwards.
    let l = layout.stages;
    let mut acc = stages[l - 1].instrument.total()?;
    for i in (0..l - 1).rev() {
        let st = &stages[i];
        let traced = inputs[i].1.union(&st.block).union(st.buffer.as_ref().unwrap());
        let reg_t = register(rho.op(), &traced)?;
        let branch = Channel::compose(vec![st.instrument.fail.clone(), Channel::trace_out(reg_t), acc])?;
        acc = Channel::sum(vec![st.instrument.success.clone(), branch])?;
    }
    let channel = acc;
    if channel.input().sites != all_b {
        return Err(Error::Solver(format!("assembled channel reads {} instead of {b}", channel.input().sites)));
    }
    let report = channel.validate()?;
    let rho_ab = rho.reduce(&a.union(b))?;
    let out = channel_apply(&channel, &rho_ab)?;
    let error = rho.op().sub(&out)?.trace_norm()?;

    let mut ledger = Vec::new();
    let mut weight = 1.0;
    let mut bound = 0.0;
    for (i, st) in stages.iter().enumerate() {
        let p = st.instrument.p_success;
        bound += weight * p * st.normalized_err;
        ledger.push(LedgerEntry::new(format!("stage{}_success_probability_positive", i + 1), -p, 0.0));
        if i + 1 < l {
            // Correlation between what survives a failure and the failed block.
            let (ai, _, input) = &inputs[i];
            let x = ai.difference(st.buffer.as_ref().unwrap());
            let failed = channel_apply(&st.instrument.fail, input)?;
            let q = 1.0 - p;
            let lhs = if q > 1e-15 {
                let survivors = failed.partial_trace(&x)?.scale(1.0 / q);
                q * rho.reduce(&x)?.op().sub(&survivors)?.trace_norm()?
            } else {
                0.0
            };
            let cor = thermal::correlation(&rho, &x, &st.block, 0, opts.seed)?.cor_upper;
            ledger.push(LedgerEntry::new(format!("stage{}_failure_correlation", i + 1), lhs, cor));
            bound += weight * cor;
        } else {
            let q = 1.0 - p;
            if q > 1e-15 {
                let failed = channel_apply(&st.instrument.fail, &inputs[i].2)?;
                let fail_err = rho.op().sub(&failed.scale(1.0 / q))?.trace_norm()?;
                bound += weight * q * fail_err;
            }
        }
        weight *= 1.0 - p;
    }
    ledger.push(LedgerEntry::new("rus_error_within_assembled_bound", error, bound + 1e-9));
    Ok(RusPlan { layout, stages, channel, report, error, bound, ledger })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CmiDecayRow {
    pub l: usize,
    /// `I(A:C|B_l)` with `C` everything beyond `B_l`.
    pub cmi: f64,
    /// `I(A:B_l)`.
    pub mi: f64,
    /// `I(A:B_{l+1}) − I(A:B_l)`, absent for the outermost shell.
    pub increment: Option<f64>,
    /// `I(A:b_{l+1}|B_l)`.
    pub conditional: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CmiDecay {
    pub rows: Vec<CmiDecayRow>,
    /// Largest `|increment − conditional|`.
    pub chain_rule_residual: f64,
    pub cmi_non_increasing: bool,
    pub increments_non_increasing: bool,
}

/// Shells `B_l = {x : 1 ≤ d(x, A) ≤ l}` around `A` and the mutual information they carry.
pub fn cmi_decay_experiment(h: &Hamiltonian, beta: f64, a: &SiteSet, widths: &[usize]) -> Result<CmiDecay> {
    let geom = h.geometry();
    geom.check(a)?;
    if a.is_empty() {
        return domain("A must be non-empty");
    }
    let rho = thermal::gibbs_state(h, beta)?.state;
    let all = geom.all_sites();
    let shell = |l: usize| -> SiteSet { all.iter().filter(|&x| !a.contains(x) && geom.set_distance(a, &SiteSet::single(x)) <= l).collect() };
    let max_l = all.iter().map(|x| geom.set_distance(a, &SiteSet::single(x))).max().unwrap_or(0);
    let mut cache = EntropyCache::new(&rho);
    let mut rows = Vec::with_capacity(widths.len());
    let mut residual: f64 = 0.0;
    for &l in widths {
        if l == 0 || l > max_l {
            return domain(format!("width {l} outside 1..={max_l}"));
        }
        let bl = shell(l);
        let c = all.difference(a).difference(&bl);
        let cmi = if c.is_empty() { 0.0 } else { cache.cmi(a, &bl, &c)? };
        let mi = mutual(&mut cache, a, &bl)?;
        let (increment, conditional) = if l < max_l {
            let bn = shell(l + 1);
            let inc = mutual(&mut cache, a, &bn)? - mi;
            let cond = cache.cmi(a, &bl, &bn.difference(&bl))?;
            residual = residual.max((inc - cond).abs());
            (Some(inc), Some(cond))
        } else {
            (None, None)
        };
        rows.push(CmiDecayRow { l, cmi, mi, increment, conditional });
    }
    let cmi_non_increasing = rows.windows(2).all(|w| w[1].cmi <= w[0].cmi + 1e-9);
    let incs: Vec<f64> = rows.iter().filter_map(|r| r.conditional).collect();
    let increments_non_increasing = incs.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    Ok(CmiDecay { rows, chain_rule_residual: residual, cmi_non_increasing, increments_non_increasing })
}

fn mutual(cache: &mut EntropyCache<'_>, a: &SiteSet, b: &SiteSet) -> Result<f64> {
    Ok(cache.s(a)? + cache.s(b)? - cache.s(&a.union(b))?)
}

/// Depth-two layout `A_1B_1C_1 … A_kB_kC_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DepthTwoLayout {
    pub k: usize,
    pub l: usize,
    /// Width of the inner buffers `C_1 … C_{k-1}`.
    pub c: usize,
    /// Width of the trailing `C_k`, recovered from `B_k` alone.
    pub tail: usize,
}

impl DepthTwoLayout {
    /// `A_1B_1C_1 … A_kB_kC_k` with `|A_i| = |B_i| = l`, inner buffers of width `c`,
    /// and whatever remains of the `n` sites in `C_k`.
    pub fn fit(n: usize, k: usize, l: usize, c: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return domain("k and l must be positive");
        }
        if k > 1 && c == 0 {
            return domain("inner buffers need c >= 1");
        }
        let used = 2 * k * l + (k - 1) * c;
        if used > n {
            return domain(format!("k = {k}, l = {l}, c = {c} needs {used} sites, chain has {n}"));
        }
        Ok(Self { k, l, c, tail: n - used })
    }

    pub fn len(&self) -> usize {
        2 * self.k * self.l + self.k.saturating_sub(1) * self.c + self.tail
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(A_i, B_i, C_i)` for every block.
    fn regions(&self) -> Vec<(SiteSet, SiteSet, SiteSet)> {
        let mut out = Vec::with_capacity(self.k);
        let mut pos = 0;
        for i in 0..self.k {
            let a = SiteSet::range(pos, pos + self.l);
            let b = SiteSet::range(pos + self.l, pos + 2 * self.l);
            pos += 2 * self.l;
            let w = if i + 1 < self.k { self.c } else { self.tail };
            out.push((a, b, SiteSet::range(pos, pos + w)));
            pos += w;
        }
        out
    }
}

/// Buffer width `max(1, round(ξ·ln d))`.
pub fn default_buffer_width(xi: f64, local_dim: usize) -> usize {
    ((xi * (local_dim as f64).ln()).round() as usize).max(1)
}

#[derive(Clone, Debug)]
pub struct DepthTwo {
    pub layout: DepthTwoLayout,
    pub channel: Channel,
    pub report: ChannelReport,
    /// `‖Δ(τ) − ρ^H‖₁`.
    pub error: f64,
    pub ledger: Vec<LedgerEntry>,
}

/// Depth-two preparation: layer one prepares every `ρ_{A_iB_i}` from scratch,
/// layer two fills each `C_i` with the Petz map of `ρ_{B_iC_iA_{i+1}}` from `B_iA_{i+1}`
/// (`B_k` alone for the trailing buffer).
pub fn depth_two_prepare(h: &Hamiltonian, beta: f64, layout: DepthTwoLayout) -> Result<DepthTwo> {
    let geom = h.geometry();
    if layout.len() != geom.n() {
        return domain(format!("layout covers {} sites, chain has {}", layout.len(), geom.n()));
    }
    let rho = thermal::gibbs_state(h, beta)?.state;
    let regions = layout.regions();
    let dims = |s: &SiteSet| geom.dims_of(s);
    let mut layer1 = Vec::with_capacity(layout.k);
    for (a, b, _) in &regions {
        let ab = a.union(b);
        layer1.push(Channel::replace(Register::new(ab.clone(), dims(&ab))?, rho.reduce(&ab)?)?);
    }
    // (bridge, buffer, recovery) per non-empty C_i.
    let mut recoveries = Vec::new();
    let mut layer2 = Vec::new();
    for (i, (_, b, c)) in regions.iter().enumerate() {
        if c.is_empty() {
            continue;
        }
        let bridge = match regions.get(i + 1) {
            Some((a_next, _, _)) => b.union(a_next),
            None => b.clone(),
        };
        let petz = petz_recovery(&rho.reduce(&bridge.union(c))?, &bridge)?;
        layer2.push(Channel::compose(vec![Channel::trace_out(Register::new(c.clone(), dims(c))?), petz.clone()])?);
        recoveries.push((i, petz));
    }
    let mut parts = vec![Channel::tensor(layer1)?];
    if !layer2.is_empty() {
        parts.push(Channel::tensor(layer2)?);
    }
    let channel = Channel::compose(parts)?;
    let all = geom.all_sites();
    if channel.input().sites != all {
        return Err(Error::Solver("depth-two channel does not read the whole chain".into()));
    }
    let report = channel.validate()?;
    let tau = DensityMatrix::maximally_mixed(all.clone(), geom.dims().to_vec());
    let out = channel_apply(&channel, &tau)?;
    let error = rho.op().sub(&out)?.trace_norm()?;

    // Triangle-inequality ledger, filling buffers left to right: decorrelation of the
    // prepared prefix from the next block, plus the recovery error on the true marginal.
    let mut ledger = Vec::new();
    let mut bound = 0.0;
    let ab = |j: usize| regions[j].0.union(&regions[j].1);
    let mut prefix = ab(0);
    for (i, petz) in &recoveries {
        // Inner buffers are never empty, so block i + 1 joins right before C_i is filled.
        if *i + 1 < layout.k {
            let next = ab(*i + 1);
            let joint = rho.reduce(&prefix.union(&next))?;
            let product = rho.reduce(&prefix)?.tensor(&rho.reduce(&next)?)?;
            let decor = trace_distance(&joint, &product)?;
            ledger.push(LedgerEntry::new(format!("block{}_decorrelation", i + 2), decor, 2.0));
            bound += decor;
            prefix = prefix.union(&next);
        }
        let filled = prefix.union(&regions[*i].2);
        let rec = channel_apply(petz, &rho.reduce(&prefix)?)?;
        let rec_err = rho.reduce(&filled)?.op().sub(&rec)?.trace_norm()?;
        ledger.push(LedgerEntry::new(format!("buffer{}_recovery", i + 1), rec_err, 2.0));
        bound += rec_err;
        prefix = filled;
    }
    ledger.push(LedgerEntry::new("depth_two_error_within_bound", error, bound + 1e-9));
    Ok(DepthTwo { layout, channel, report, error, ledger })
}

#[derive(Clone, Debug)]
pub struct Thm3States {
    /// `Λ_{B₂→B₂C} ∘ Λ_{B₁→AB₁}(ρ_B)`.
    pub rho_tilde_prime: DensityMatrix,
    /// `(1 − 2^{−(N−1)}) ρ̃′ + 2^{−(N−1)} τ`.
    pub rho_tilde: DensityMatrix,
    /// `max(I(A:B₂|B₁), I(B₁:C|B₂))`.
    pub epsilon: f64,
    pub ledger: Vec<LedgerEntry>,
}

/// Recovered global state from `ρ_B` with two Petz maps, and its full-rank modification.
pub fn thm3_states(rho: &DensityMatrix, a: &SiteSet, b1: &SiteSet, b2: &SiteSet, c: &SiteSet) -> Result<Thm3States> {
    let parts = [a, b1, b2, c];
    for (i, x) in parts.iter().enumerate() {
        if x.is_empty() {
            return domain("every region must be non-empty");
        }
        for y in &parts[i + 1..] {
            if !x.is_disjoint(y) {
                return domain("regions must be disjoint");
            }
        }
    }
    let abc = a.union(b1).union(b2).union(c);
    if &abc != rho.sites() {
        return domain(format!("regions cover {abc}, state lives on {}", rho.sites()));
    }
    let b = b1.union(b2);
    let rho_b = rho.reduce(&b)?;
    let lam1 = petz_recovery(&rho.reduce(&a.union(b1))?, b1)?;
    let lam2 = petz_recovery(&rho.reduce(&b2.union(c))?, b2)?;
    let stage1 = channel_apply(&lam1, &rho_b)?;
    let prime = DensityMatrix::normalized(lam2.apply(&stage1)?.hermitian()?)?;
    let n = rho.sites().len() as i32;
    let w = 2f64.powi(-(n - 1));
    let tilde = crate::states::mix_with_identity(&prime, w)?;

    let eps = info::cmi(rho, a, b1, b2)?.max(info::cmi(rho, b1, b2, c)?).max(0.0);
    let se = 2.0 * eps.sqrt();
    let ab = a.union(&b);
    let bc = b.union(c);
    let mut ledger = Vec::new();
    let r_ab = rho.reduce(&ab)?;
    let r_bc = rho.reduce(&bc)?;
    ledger.push(LedgerEntry::new("recovery_of_AB", r_ab.op().sub(&stage1)?.trace_norm()?, se));
    let stage2 = channel_apply(&lam2, &rho_b)?;
    ledger.push(LedgerEntry::new("recovery_of_BC", r_bc.op().sub(&stage2)?.trace_norm()?, se));
    ledger.push(LedgerEntry::new("marginal_AB", trace_distance(&r_ab, &prime.reduce(&ab)?)?, 2.0 * se));
    ledger.push(LedgerEntry::new("marginal_BC", trace_distance(&r_bc, &prime.reduce(&bc)?)?, 2.0 * se));
    let again = lam2.apply(prime.reduce(&ab)?.op())?;
    ledger.push(LedgerEntry::new("approximately_recoverable", prime.op().sub(&again)?.trace_norm()?, 3.0 * se));
    // ‖ρ̃ − ρ̃′‖₁ = 2^{−(N−1)}‖τ − ρ̃′‖₁ ≤ 2^{−(N−2)}.
    ledger.push(LedgerEntry::new("full_rank_mixing", trace_distance(&tilde, &prime)?, 2.0 * w));
    let log_a: f64 = rho.op().dims_of(a)?.iter().map(|&d| (d as f64).ln()).sum();
    let cmi_tilde = info::cmi(&tilde, a, &b, c)?;
    let rhs = 6.0 * 6f64.sqrt() * log_a * eps.powf(0.25) + 12.0 * log_a / 2f64.powi(n).sqrt();
    ledger.push(LedgerEntry::new("cmi_of_recovered_state", cmi_tilde, rhs));
    Ok(Thm3States { rho_tilde_prime: prime, rho_tilde: tilde, epsilon: eps, ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    #[test]
    fn petz_fixed_point() {
        let mut r = random::rng(1);
        let rho = random::density(SiteSet::range(0, 3), vec![2; 3], 3, &mut r).unwrap();
        let b = SiteSet::range(0, 1);
        let ch = petz_recovery(&rho, &b).unwrap();
        let out = channel_apply(&ch, &rho.reduce(&b).unwrap()).unwrap();
        assert!(rho.op().sub(&out).unwrap().trace_norm().unwrap() < 1e-9);
        let rep = ch.validate().unwrap();
        assert!(rep.cp && rep.tp_defect < 1e-9);
    }

    #[test]
    fn petz_completes_rank_deficient_reference() {
        let g = crate::states::ghz(3).unwrap();
        let b = SiteSet::single(1);
        let ch = petz_recovery(&g.reduce(&SiteSet::range(1, 3)).unwrap(), &b).unwrap();
        let rep = ch.validate().unwrap();
        assert!(rep.tp_defect < 1e-9, "{rep:?}");
    }

    #[test]
    fn depth_two_layout_fit() {
        assert_eq!(DepthTwoLayout::fit(9, 2, 2, 1).unwrap().tail, 0);
        assert_eq!(DepthTwoLayout::fit(9, 2, 1, 1).unwrap().tail, 4);
        assert_eq!(DepthTwoLayout::fit(9, 1, 2, 0).unwrap().len(), 9);
        assert!(DepthTwoLayout::fit(9, 2, 1, 0).is_err());
        assert!(DepthTwoLayout::fit(9, 2, 3, 1).is_err());
        assert_eq!(RusLayout::standard(2).b_len(), 10);
    }
}
