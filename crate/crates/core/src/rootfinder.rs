//! Zeros of entire functions in rectangles via the argument principle.
//!
//! Winding numbers come from phase continuation along the boundary: each
//! edge is sampled and segments are bisected until consecutive phase steps
//! stay below `pi/2`. All sample points of a search live on one integer
//! lattice over the root rectangle, so sub-boxes reuse the values already
//! computed on their parents' edges.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::{BoundarySpec, CharacteristicFunction};
use crate::error::{Error, Result};
use crate::model::AssociatedMatrix;

/// An evaluable complex function.
pub type Target<'a> = dyn Fn(Complex64) -> Result<Complex64> + Sync + 'a;

pub const DEFAULT_QUADRATURE: usize = 32;
const MAX_JITTERS: usize = 5;
const SPLIT_ATTEMPTS: usize = 4;
const LATTICE_BITS: u32 = 40;
const MIN_EDGE_SEGMENTS: i64 = 4;
/// Phase turn allowed per edge segment by the growth bound; aliasing needs
/// more than `3 pi / 2`.
const PHASE_BUDGET: f64 = 2.0;
const DIP: f64 = 1e-8;
const CLUSTER: f64 = 1e-6;
const NEWTON_ITERS: usize = 60;
/// Counting tolerance for characteristic functions; phases need far less
/// accuracy than polished roots.
const COUNT_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Complex64,
    pub half_re: f64,
    pub half_im: f64,
}

impl Rect {
    pub fn new(center: Complex64, half_re: f64, half_im: f64) -> Self {
        Rect {
            center,
            half_re,
            half_im,
        }
    }

    pub fn square(center: Complex64, half: f64) -> Self {
        Rect::new(center, half, half)
    }

    /// Closed containment.
    pub fn contains(&self, z: Complex64) -> bool {
        (z.re - self.center.re).abs() <= self.half_re && (z.im - self.center.im).abs() <= self.half_im
    }

    /// Radius of the largest origin-centred disk inside the rectangle.
    pub fn inner_radius(&self) -> f64 {
        let re = self.half_re - self.center.re.abs();
        let im = self.half_im - self.center.im.abs();
        re.min(im).max(0.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.half_re > 0.0
            && self.half_im > 0.0
            && self.half_re.is_finite()
            && self.half_im.is_finite()
            && self.center.re.is_finite()
            && self.center.im.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("degenerate search box {self:?}")))
        }
    }

    /// The `attempt`-th jittered copy: half-widths grow by `1.37%` and the
    /// centre moves by `0.71%` / `0.53%` of the half-widths per attempt.
    pub fn jittered(&self, attempt: usize) -> Rect {
        let a = attempt as f64;
        Rect {
            center: self.center + Complex64::new(0.0071 * a * self.half_re, 0.0053 * a * self.half_im),
            half_re: self.half_re * (1.0 + 0.0137 * a),
            half_im: self.half_im * (1.0 + 0.0137 * a),
        }
    }
}

/// Square centred at the origin with half-width `(pi (count + 2))^n`.
pub fn plan_search_box(n: usize, count: usize) -> Rect {
    Rect::square(Complex64::new(0.0, 0.0), (PI * (count as f64 + 2.0)).powi(n as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct IBox {
    x0: i64,
    x1: i64,
    y0: i64,
    y1: i64,
}

/// Memoised evaluation on the integer lattice of a root rectangle.
struct Lattice<'a, 'f> {
    f: &'a Target<'f>,
    lo: Complex64,
    unit_re: f64,
    unit_im: f64,
    step: i64,
    growth: Option<usize>,
    cache: Mutex<HashMap<(i64, i64), Complex64>>,
}

impl<'a, 'f> Lattice<'a, 'f> {
    fn new(f: &'a Target<'f>, rect: &Rect, quadrature: usize, growth: Option<usize>) -> Self {
        let full = 1i64 << LATTICE_BITS;
        let q = quadrature.max(MIN_EDGE_SEGMENTS as usize) as i64;
        let step = 1i64 << (63 - (full / q).leading_zeros() as i64);
        Lattice {
            f,
            lo: rect.center - Complex64::new(rect.half_re, rect.half_im),
            unit_re: 2.0 * rect.half_re / full as f64,
            unit_im: 2.0 * rect.half_im / full as f64,
            step,
            growth,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn root(&self) -> IBox {
        let full = 1i64 << LATTICE_BITS;
        IBox {
            x0: 0,
            x1: full,
            y0: 0,
            y1: full,
        }
    }

    fn point(&self, p: (i64, i64)) -> Complex64 {
        Complex64::new(self.lo.re + self.unit_re * p.0 as f64, self.lo.im + self.unit_im * p.1 as f64)
    }

    fn half_diag(&self, b: &IBox) -> f64 {
        let w = self.unit_re * (b.x1 - b.x0) as f64;
        let h = self.unit_im * (b.y1 - b.y0) as f64;
        0.5 * w.hypot(h)
    }

    fn center(&self, b: &IBox) -> Complex64 {
        let c = self.point((b.x0, b.y0)) + self.point((b.x1, b.y1));
        c * 0.5
    }

    fn contains(&self, b: &IBox, z: Complex64, margin: f64) -> bool {
        let lo = self.point((b.x0, b.y0));
        let hi = self.point((b.x1, b.y1));
        z.re >= lo.re - margin && z.re <= hi.re + margin && z.im >= lo.im - margin && z.im <= hi.im + margin
    }

    fn eval(&self, pts: &[(i64, i64)]) -> Result<Vec<Complex64>> {
        let missing: Vec<(i64, i64)> = {
            let cache = self.cache.lock().unwrap();
            let mut m: Vec<(i64, i64)> = pts.iter().filter(|p| !cache.contains_key(p)).copied().collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        let fresh: Vec<Complex64> = missing
            .par_iter()
            .map(|&p| (self.f)(self.point(p)))
            .collect::<Result<_>>()?;
        let mut cache = self.cache.lock().unwrap();
        for (p, v) in missing.into_iter().zip(fresh) {
            cache.insert(p, v);
        }
        Ok(pts.iter().map(|p| cache[p]).collect())
    }

    /// Splits segments until an exponential `exp(s rho)`, `rho^n = lambda`,
    /// turns by at most `PHASE_BUDGET` along each one. Here `|s|` is bounded
    /// by `1 / sin(pi / n)`, the largest modulus of a sum of consecutive
    /// `n`-th roots of unity, and `|d rho / d lambda| = |lambda|^{1/n - 1} / n`
    /// is taken at the distance of the segment from the origin (clamped at 1).
    fn refine_for_growth(&self, coords: &[i64], at: &dyn Fn(i64) -> (i64, i64), n: usize) -> Vec<i64> {
        let expo = 1.0 / n as f64 - 1.0;
        let speed = 1.0 / ((PI / n as f64).sin() * n as f64);
        let mut out = vec![coords[0]];
        for w in coords.windows(2) {
            let mut stack = vec![(w[0], w[1])];
            while let Some((a, b)) = stack.pop() {
                let (za, zb) = (self.point(at(a)), self.point(at(b)));
                let len = (zb - za).norm();
                let rate = speed * segment_distance(za, zb).max(1.0).powf(expo);
                if len * rate > PHASE_BUDGET && (b - a).abs() >= 2 {
                    let m = a + (b - a) / 2;
                    stack.push((m, b));
                    stack.push((a, m));
                } else {
                    out.push(b);
                }
            }
        }
        out
    }

    /// Total phase change along the straight lattice segment `a -> b`;
    /// `None` signals a suspected zero on the segment.
    fn edge_phase(&self, a: (i64, i64), b: (i64, i64)) -> Result<Option<f64>> {
        let horizontal = a.1 == b.1;
        let (ca, cb) = if horizontal { (a.0, b.0) } else { (a.1, b.1) };
        let at = |c: i64| if horizontal { (c, a.1) } else { (a.0, c) };
        let len = (cb - ca).abs();
        let mut step = self.step;
        while step > 1 && len / step < MIN_EDGE_SEGMENTS {
            step /= 2;
        }
        let (lo, hi) = (ca.min(cb), ca.max(cb));
        let mut coords = vec![lo];
        let mut c = (lo / step + 1) * step;
        while c < hi {
            coords.push(c);
            c += step;
        }
        coords.push(hi);
        if let Some(n) = self.growth {
            coords = self.refine_for_growth(&coords, &at, n);
        }
        if cb < ca {
            coords.reverse();
        }
        let pts: Vec<(i64, i64)> = coords.iter().map(|&c| at(c)).collect();
        let mut vals = self.eval(&pts)?;
        loop {
            if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() == 0.0) {
                return Ok(None);
            }
            let mut mids = Vec::new();
            for i in 0..coords.len() - 1 {
                if (vals[i + 1] / vals[i]).arg().abs() >= 0.5 * PI {
                    if (coords[i + 1] - coords[i]).abs() < 2 {
                        return Ok(None);
                    }
                    mids.push(i);
                }
            }
            if mids.is_empty() {
                break;
            }
            let new_coords: Vec<i64> = mids.iter().map(|&i| coords[i] + (coords[i + 1] - coords[i]) / 2).collect();
            let new_pts: Vec<(i64, i64)> = new_coords.iter().map(|&c| at(c)).collect();
            let new_vals = self.eval(&new_pts)?;
            for (k, &i) in mids.iter().enumerate() {
                let local = vals[i].norm().max(vals[i + 1].norm());
                if new_vals[k].norm() < DIP * local {
                    return Ok(None);
                }
            }
            let mut merged_c = Vec::with_capacity(coords.len() + mids.len());
            let mut merged_v = Vec::with_capacity(coords.len() + mids.len());
            let mut next = 0;
            for i in 0..coords.len() {
                merged_c.push(coords[i]);
                merged_v.push(vals[i]);
                if next < mids.len() && mids[next] == i {
                    merged_c.push(new_coords[next]);
                    merged_v.push(new_vals[next]);
                    next += 1;
                }
            }
            coords = merged_c;
            vals = merged_v;
        }
        Ok(Some(vals.windows(2).map(|w| (w[1] / w[0]).arg()).sum()))
    }

    /// Zero count inside `b`, or `None` when a boundary zero is suspected.
    fn winding(&self, b: &IBox) -> Result<Option<usize>> {
        let corners = [(b.x0, b.y0), (b.x1, b.y0), (b.x1, b.y1), (b.x0, b.y1)];
        let mut total = 0.0;
        for i in 0..4 {
            match self.edge_phase(corners[i], corners[(i + 1) % 4])? {
                Some(p) => total += p,
                None => return Ok(None),
            }
        }
        winding_from_phase(total)
    }
}

/// Distance from the origin to the segment `[a, b]`.
fn segment_distance(a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a.norm();
    }
    let t = (-(a.re * d.re + a.im * d.im) / len2).clamp(0.0, 1.0);
    (a + d * t).norm()
}

fn winding_from_phase(total: f64) -> Result<Option<usize>> {
    let w = total / (2.0 * PI);
    let r = w.round();
    if (w - r).abs() > 0.25 {
        return Err(Error::Refinement(format!("non-integer winding number {w}")));
    }
    if r < 0.0 {
        return Err(Error::Refinement(format!("negative winding number {r} for an entire function")));
    }
    Ok(Some(r as usize))
}

/// Number of zeros (with multiplicity) of `f` inside `rect`, jittering the
/// box when a zero on the boundary is suspected.
pub fn count_zeros(f: &Target, rect: &Rect, quadrature: usize) -> Result<usize> {
    Ok(count_zeros_jittered(f, rect, quadrature)?.0)
}

/// Like [`count_zeros`], also returning the rectangle actually used.
pub fn count_zeros_jittered(f: &Target, rect: &Rect, quadrature: usize) -> Result<(usize, Rect)> {
    rect.validate()?;
    for attempt in 0..MAX_JITTERS {
        let region = rect.jittered(attempt);
        let lat = Lattice::new(f, &region, quadrature, None);
        if let Some(c) = lat.winding(&lat.root())? {
            return Ok((c, region));
        }
    }
    Err(Error::BoundaryZero { jitters: MAX_JITTERS })
}

/// Zeros on a circle's interior: the winding number along
/// `center + r e^{i theta}`, or `None` on a suspected boundary zero.
pub fn circle_winding(f: &Target, center: Complex64, radius: f64, quadrature: usize) -> Result<Option<usize>> {
    let q = quadrature.max(8);
    let at = |t: f64| center + Complex64::from_polar(radius, 2.0 * PI * t);
    let mut ts: Vec<f64> = (0..=q).map(|j| j as f64 / q as f64).collect();
    let mut vals: Vec<Complex64> = ts[..q].par_iter().map(|&t| f(at(t))).collect::<Result<_>>()?;
    vals.push(vals[0]);
    loop {
        if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() == 0.0) {
            return Ok(None);
        }
        let mids: Vec<usize> = (0..ts.len() - 1)
            .filter(|&i| (vals[i + 1] / vals[i]).arg().abs() >= 0.5 * PI)
            .collect();
        if mids.is_empty() {
            break;
        }
        if mids.iter().any(|&i| ts[i + 1] - ts[i] < 1e-7) {
            return Ok(None);
        }
        let new_t: Vec<f64> = mids.iter().map(|&i| 0.5 * (ts[i] + ts[i + 1])).collect();
        let new_v: Vec<Complex64> = new_t.par_iter().map(|&t| f(at(t))).collect::<Result<_>>()?;
        for (k, &i) in mids.iter().enumerate() {
            if new_v[k].norm() < DIP * vals[i].norm().max(vals[i + 1].norm()) {
                return Ok(None);
            }
        }
        let mut t2 = Vec::with_capacity(ts.len() + mids.len());
        let mut v2 = Vec::with_capacity(ts.len() + mids.len());
        let mut next = 0;
        for i in 0..ts.len() {
            t2.push(ts[i]);
            v2.push(vals[i]);
            if next < mids.len() && mids[next] == i {
                t2.push(new_t[next]);
                v2.push(new_v[next]);
                next += 1;
            }
        }
        ts = t2;
        vals = v2;
    }
    winding_from_phase(vals.windows(2).map(|w| (w[1] / w[0]).arg()).sum())
}

/// Central-difference derivative with step `1e-6 (1 + |z|)`.
pub fn derivative(f: &Target, z: Complex64) -> Result<Complex64> {
    let h = 1e-6 * (1.0 + z.norm());
    let d = Complex64::new(h, 0.0);
    Ok((f(z + d)? - f(z - d)?) / (2.0 * h))
}

/// Newton iteration `z -= mult f / f'`; `None` when it diverges or leaves
/// the acceptance region.
pub(crate) fn newton(
    f: &Target,
    z0: Complex64,
    mult: usize,
    inside: &dyn Fn(Complex64) -> bool,
    stop: f64,
) -> Result<Option<Complex64>> {
    let mut z = z0;
    let mut last = f64::INFINITY;
    for _ in 0..NEWTON_ITERS {
        let fz = f(z)?;
        if fz.norm() == 0.0 {
            return Ok(Some(z));
        }
        let d = derivative(f, z)?;
        let step = fz / d * mult as f64;
        if !step.re.is_finite() || !step.im.is_finite() {
            return Ok(None);
        }
        z -= step;
        if !inside(z) {
            return Ok(None);
        }
        let s = step.norm();
        let scale = 1.0 + z.norm();
        if s <= stop * scale || (s <= 1e-9 * scale && s > 0.5 * last) {
            return Ok(Some(z));
        }
        last = s;
    }
    Ok(None)
}

/// Multiplicity of a polished root: winding on disks of radius
/// `1e-4 (1 + |z|)`, shrunk tenfold until the count matches `expected`.
fn disk_multiplicity(f: &Target, z: Complex64, expected: usize) -> Result<Option<usize>> {
    let mut r = 1e-4 * (1.0 + z.norm());
    for _ in 0..4 {
        if let Some(m) = circle_winding(f, z, r, 16)? {
            if m == expected {
                return Ok(Some(m));
            }
        }
        r *= 0.1;
    }
    Ok(None)
}

/// A zero with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub lambda: Complex64,
    pub multiplicity: usize,
}

/// Result of a complete search of a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSet {
    pub zeros: Vec<Eigenvalue>,
    pub residuals: Vec<f64>,
    /// Rectangle actually searched (possibly jittered).
    pub region: Rect,
    /// Argument-principle count over `region`.
    pub argument_count: usize,
}

/// Principal argument in `(-pi, pi]`.
pub fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Sorts by modulus (relative ties within `1e-9`), then by principal
/// argument.
pub fn canonical_sort(zeros: &mut [Eigenvalue]) {
    zeros.sort_by(|a, b| a.lambda.norm().total_cmp(&b.lambda.norm()));
    let mut start = 0;
    while start < zeros.len() {
        let mut end = start + 1;
        while end < zeros.len() {
            let prev = zeros[end - 1].lambda.norm();
            let cur = zeros[end].lambda.norm();
            if cur - prev > 1e-9 * (1.0 + cur) {
                break;
            }
            end += 1;
        }
        zeros[start..end].sort_by(|a, b| principal_arg(a.lambda).total_cmp(&principal_arg(b.lambda)));
        start = end;
    }
}

/// All zeros of `f` in `rect`. `max_count` caps the argument-principle
/// count of the box; a larger count is an error rather than a partial
/// answer.
pub fn find_zeros(f: &Target, rect: &Rect, max_count: usize, quadrature: usize) -> Result<ZeroSet> {
    find_zeros_with(f, f, rect, max_count, quadrature, None)
}

/// As [`find_zeros`], counting with `count_f` and polishing with `polish_f`
/// (two accuracies of the same function). With `growth = Some(n)` the edge
/// sampling is refined for functions growing like `exp(C lambda^{1/n})`.
pub fn find_zeros_with(
    count_f: &Target,
    polish_f: &Target,
    rect: &Rect,
    max_count: usize,
    quadrature: usize,
    growth: Option<usize>,
) -> Result<ZeroSet> {
    rect.validate()?;
    for attempt in 0..MAX_JITTERS {
        let region = rect.jittered(attempt);
        let lat = Lattice::new(count_f, &region, quadrature, growth);
        let root = lat.root();
        let Some(total) = lat.winding(&root)? else {
            continue;
        };
        if total > max_count {
            return Err(Error::TooManyZeros {
                found: total,
                cap: max_count,
            });
        }
        let zeros = resolve(&lat, polish_f, root, total)?;
        let found: usize = zeros.iter().map(|z| z.multiplicity).sum();
        if found != total {
            return Err(Error::InconsistentRoots { expected: total, found });
        }
        let residuals = zeros
            .iter()
            .map(|z| polish_f(z.lambda).map(|v| v.norm()))
            .collect::<Result<_>>()?;
        return Ok(ZeroSet {
            zeros,
            residuals,
            region,
            argument_count: total,
        });
    }
    Err(Error::BoundaryZero { jitters: MAX_JITTERS })
}

fn split_box(lat: &Lattice, b: &IBox, count: usize) -> Result<Vec<(IBox, usize)>> {
    for attempt in 0..SPLIT_ATTEMPTS {
        let frac = 0.5173 + 0.0411 * attempt as f64;
        let sx = b.x0 + ((b.x1 - b.x0) as f64 * frac) as i64;
        let sy = b.y0 + ((b.y1 - b.y0) as f64 * (1.0 - frac)) as i64;
        if sx <= b.x0 || sx >= b.x1 || sy <= b.y0 || sy >= b.y1 {
            break;
        }
        let kids = [
            IBox { x0: b.x0, x1: sx, y0: b.y0, y1: sy },
            IBox { x0: sx, x1: b.x1, y0: b.y0, y1: sy },
            IBox { x0: b.x0, x1: sx, y0: sy, y1: b.y1 },
            IBox { x0: sx, x1: b.x1, y0: sy, y1: b.y1 },
        ];
        let mut out = Vec::with_capacity(4);
        let mut ok = true;
        for k in kids {
            match lat.winding(&k)? {
                Some(c) => out.push((k, c)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && out.iter().map(|(_, c)| c).sum::<usize>() == count {
            return Ok(out);
        }
    }
    Err(Error::Refinement("no admissible subdivision of a search box".into()))
}

fn resolve(lat: &Lattice, polish: &Target, root: IBox, total: usize) -> Result<Vec<Eigenvalue>> {
    let mut queue = vec![(root, total)];
    let mut zeros = Vec::new();
    while let Some((b, c)) = queue.pop() {
        if c == 0 {
            continue;
        }
        let center = lat.center(&b);
        let size = lat.half_diag(&b);
        let scale = 1.0 + center.norm();
        let margin = 1e-9 * scale;
        let inside = |z: Complex64| lat.contains(&b, z, margin);
        let small = size < 1e-2 * scale;
        if c == 1 || small {
            let wide = |z: Complex64| lat.contains(&b, z, 2.0 * size);
            let approach = newton(lat.f, center, c, &wide, 1e-8)?;
            let polished = match approach {
                Some(z0) => newton(polish, z0, c, &wide, 1e-13)?,
                None => None,
            };
            if let Some(z) = polished {
                if inside(z) {
                    if let Some(m) = disk_multiplicity(lat.f, z, c)? {
                        zeros.push(Eigenvalue {
                            lambda: z,
                            multiplicity: m,
                        });
                        continue;
                    }
                }
            }
        }
        if size < CLUSTER * scale || b.x1 - b.x0 < 4 || b.y1 - b.y0 < 4 {
            // unresolved cluster: report the centre with the box count
            zeros.push(Eigenvalue {
                lambda: center,
                multiplicity: c,
            });
            continue;
        }
        let kids = split_box(lat, &b, c)?;
        queue.extend(kids.into_iter().rev());
    }
    merge_duplicates(&mut zeros);
    canonical_sort(&mut zeros);
    Ok(zeros)
}

fn merge_duplicates(zeros: &mut Vec<Eigenvalue>) {
    let mut out: Vec<Eigenvalue> = Vec::with_capacity(zeros.len());
    for z in zeros.drain(..) {
        match out
            .iter_mut()
            .find(|o| (o.lambda - z.lambda).norm() <= 1e-10 * (1.0 + z.lambda.norm()))
        {
            Some(o) => o.multiplicity += z.multiplicity,
            None => out.push(z),
        }
    }
    *zeros = out;
}

/// Eigenvalues of one boundary value problem inside a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub region: Rect,
    pub problem: BoundarySpec,
    pub residuals: Vec<f64>,
    pub argument_count: usize,
}

impl Spectrum {
    /// Eigenvalues repeated according to multiplicity, in canonical order.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity))
            .collect()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    /// Eigenvalues whose modulus does not exceed the inner radius of the
    /// region; only these are guaranteed to be the smallest ones.
    pub fn leading(&self) -> Vec<Complex64> {
        let r = self.region.inner_radius();
        self.expanded().into_iter().filter(|z| z.norm() <= r).collect()
    }
}

/// Zeros of `char_function(F, spec)` in `rect`.
pub fn find_spectrum(
    f: &AssociatedMatrix,
    spec: &BoundarySpec,
    rect: &Rect,
    max_count: usize,
    tol: f64,
) -> Result<Spectrum> {
    let polish = CharacteristicFunction::new(f, spec, tol)?;
    let count = polish.with_tol(tol.max(COUNT_TOL));
    let zs = find_zeros_with(
        &|z| count.eval(z),
        &|z| polish.eval(z),
        rect,
        max_count,
        DEFAULT_QUADRATURE,
        Some(spec.order),
    )?;
    Ok(Spectrum {
        eigenvalues: zs.zeros,
        region: zs.region,
        problem: spec.clone(),
        residuals: zs.residuals,
        argument_count: zs.argument_count,
    })
}

/// Laurent coefficients `a_k` of several functions at `lambda0` from the
/// trapezoidal rule on `|lambda - lambda0| = radius`, doubling the number
/// of nodes until two successive rules agree. Result is indexed
/// `[component][k]`.
pub fn laurent_coeffs(
    f: &(dyn Fn(Complex64) -> Result<Vec<Complex64>> + Sync),
    lambda0: Complex64,
    ks: &[i32],
    radius: f64,
    quadrature: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("Laurent radius must be positive".into()));
    }
    let node = |j: usize, q: usize| Complex64::from_polar(radius, 2.0 * PI * j as f64 / q as f64);
    let mut q = quadrature.max(8);
    let mut samples: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    // samples keyed by index at the finest resolution seen so far
    let eval_all = |q: usize, have: &BTreeMap<usize, Vec<Complex64>>, stride: usize| -> Result<BTreeMap<usize, Vec<Complex64>>> {
        let need: Vec<usize> = (0..q).filter(|j| !have.contains_key(&(j * stride))).collect();
        let vals: Vec<Vec<Complex64>> = need.par_iter().map(|&j| f(lambda0 + node(j, q))).collect::<Result<_>>()?;
        Ok(need.into_iter().map(|j| j * stride).zip(vals).collect())
    };
    const LEVELS: usize = 3;
    let finest = q << (LEVELS - 1);
    let mut prev: Option<Vec<Vec<Complex64>>> = None;
    let mut change = f64::INFINITY;
    for _ in 0..LEVELS {
        let stride = finest / q;
        let fresh = eval_all(q, &samples, stride)?;
        samples.extend(fresh);
        let comps = samples.values().next().map(|v| v.len()).unwrap_or(0);
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); ks.len()]; comps];
        let mut fmax = vec![0.0f64; comps];
        for j in 0..q {
            let v = &samples[&(j * stride)];
            let z = node(j, q);
            for (c, val) in v.iter().enumerate() {
                fmax[c] = fmax[c].max(val.norm());
                for (ki, &k) in ks.iter().enumerate() {
                    coeffs[c][ki] += val * z.powi(-k);
                }
            }
        }
        for row in coeffs.iter_mut() {
            for a in row.iter_mut() {
                *a /= q as f64;
            }
        }
        if let Some(p) = &prev {
            change = 0.0;
            for c in 0..comps {
                for (ki, &k) in ks.iter().enumerate() {
                    let bound = fmax[c] * radius.powi(-k) + f64::MIN_POSITIVE;
                    change = change.max((coeffs[c][ki] - p[c][ki]).norm() / bound);
                }
            }
            if change <= 1e-10 {
                return Ok(coeffs);
            }
        }
        prev = Some(coeffs);
        q *= 2;
    }
    Err(Error::LaurentNotConverged { change })
}

/// Laurent coefficient `a_k` of `f` at `lambda0`.
pub fn laurent_coeff(f: &Target, lambda0: Complex64, k: i32, radius: f64, quadrature: usize) -> Result<Complex64> {
    let v = laurent_coeffs(&|z| Ok(vec![f(z)?]), lambda0, &[k], radius, quadrature)?;
    Ok(v[0][0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristic::delta;
    use crate::model::{build_associated_matrix, CoefficientSet, Order};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn counts_double_zero_at_origin() {
        let f = |z: Complex64| Ok(z * z);
        let n = count_zeros(&f, &Rect::square(c(0.0, 0.0), 1.0), 16).unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn counts_factorized_cubic() {
        let f = |z: Complex64| Ok((z - 3.0) * (z - 3.0) * (z + 1.0));
        assert_eq!(count_zeros(&f, &Rect::square(c(3.0, 0.0), 1.0), 16).unwrap(), 2);
        assert_eq!(count_zeros(&f, &Rect::square(c(1.0, 0.0), 3.0), 16).unwrap(), 3);
    }

    #[test]
    fn free_third_order_has_no_zero_near_origin() {
        let f = build_associated_matrix(&CoefficientSet::free(Order::Third));
        let g = |z: Complex64| delta(&f, z, 1, 1, 1e-9);
        assert_eq!(count_zeros(&g, &Rect::square(c(0.0, 0.0), 1.0), 16).unwrap(), 0);
    }

    #[test]
    fn boundary_zero_triggers_jitter() {
        // zero exactly on the right edge of the unjittered box
        let f = |z: Complex64| Ok(z - 1.0);
        let (n, region) = count_zeros_jittered(&f, &Rect::square(c(0.0, 0.0), 1.0), 16).unwrap();
        assert_eq!(n, 1);
        assert_ne!(region, Rect::square(c(0.0, 0.0), 1.0));
    }

    #[test]
    fn synthetic_double_zero_has_multiplicity_two() {
        let z0 = c(0.7, -0.4);
        let f = |z: Complex64| Ok((z - z0) * (z - z0));
        let zs = find_zeros(&f, &Rect::square(c(0.0, 0.0), 2.0), 10, 16).unwrap();
        assert_eq!(zs.zeros.len(), 1);
        assert_eq!(zs.zeros[0].multiplicity, 2);
        assert!((zs.zeros[0].lambda - z0).norm() < 1e-6);
        assert_eq!(zs.argument_count, 2);
    }

    #[test]
    fn finds_simple_and_double_zeros() {
        let f = |z: Complex64| Ok((z - 3.0) * (z - 3.0) * (z + 1.0) * (z - c(0.0, 2.0)));
        let zs = find_zeros(&f, &Rect::square(c(0.0, 0.0), 5.0), 10, 16).unwrap();
        let got: Vec<(Complex64, usize)> = zs.zeros.iter().map(|e| (e.lambda, e.multiplicity)).collect();
        assert_eq!(got.len(), 3);
        assert!((got[0].0 - c(-1.0, 0.0)).norm() < 1e-10 && got[0].1 == 1);
        assert!((got[1].0 - c(0.0, 2.0)).norm() < 1e-10 && got[1].1 == 1);
        assert!((got[2].0 - c(3.0, 0.0)).norm() < 1e-6 && got[2].1 == 2);
    }

    #[test]
    fn cap_on_count() {
        let f = |z: Complex64| Ok(z * z * z);
        assert!(matches!(
            find_zeros(&f, &Rect::square(c(0.0, 0.0), 1.0), 2, 16),
            Err(Error::TooManyZeros { found: 3, cap: 2 })
        ));
    }

    #[test]
    fn canonical_order_breaks_ties_by_argument() {
        let mut zs: Vec<Eigenvalue> = [c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.5, 0.0)]
            .iter()
            .map(|&l| Eigenvalue {
                lambda: l,
                multiplicity: 1,
            })
            .collect();
        canonical_sort(&mut zs);
        let order: Vec<Complex64> = zs.iter().map(|e| e.lambda).collect();
        assert_eq!(order, vec![c(0.5, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        assert_eq!(principal_arg(c(-1.0, -0.0)), PI);
    }

    #[test]
    fn plan_box_sizes() {
        let b = plan_search_box(4, 3);
        assert!((b.half_re - (5.0 * PI).powi(4)).abs() < 1e-6);
        assert!(b.half_re > 3806.55);
        assert!((plan_search_box(3, 1).half_re - (3.0 * PI).powi(3)).abs() < 1e-9);
        assert!(plan_search_box(5, 4).half_re >= plan_search_box(5, 3).half_re);
    }

    #[test]
    fn laurent_examples() {
        let pole = |z: Complex64| Ok(1.0 / (z - 2.0));
        let r = laurent_coeff(&pole, c(2.0, 0.0), -1, 0.5, 16).unwrap();
        assert!((r - c(1.0, 0.0)).norm() < 1e-12);
        let z0 = c(0.3, 0.1);
        let sq = move |z: Complex64| Ok((z - z0) * (z - z0));
        assert!((laurent_coeff(&sq, z0, 2, 0.5, 16).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
        assert!(laurent_coeff(&sq, z0, 1, 0.5, 16).unwrap().norm() < 1e-12);
        let ent = |z: Complex64| Ok(z.exp());
        for k in -3..0 {
            assert!(laurent_coeff(&ent, c(0.5, 0.0), k, 1.0, 16).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn beam_spectrum() {
        let f = build_associated_matrix(&CoefficientSet::free(Order::Fourth));
        let spec = BoundarySpec::named(Order::Fourth, "S12").unwrap();
        let s = find_spectrum(&f, &spec, &plan_search_box(4, 3), 100, 1e-12).unwrap();
        // one root of 1 + cos k cosh k in each ((i - 1) pi, i pi)
        let g = |k: f64| 1.0 + k.cos() * k.cosh();
        let want: Vec<f64> = (1..=3)
            .map(|i| {
                let (mut a, mut b) = ((i as f64 - 1.0) * PI, i as f64 * PI);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if g(a) * g(m) <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                (0.5 * (a + b)).powi(4)
            })
            .collect();
        for (z, w) in s.expanded().iter().zip(want) {
            assert!((z - w).norm() < 1e-7 * w, "{z} vs {w}");
        }
        assert_eq!(s.total_multiplicity(), s.argument_count);
    }
}
