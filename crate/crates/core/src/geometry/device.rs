//! Parameterized device layouts. A straight waveguide is included for solver
//! calibration next to the two optimized devices.

use crate::geometry::spline::{even_knots, sample_with_knots, NaturalSpline};
use crate::geometry::{DesignParams, GeometryError, Point, Polygon, PolygonSet};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceKind {
    YBranch,
    SwgToStripConverter,
    Straight,
}

impl DeviceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeviceKind::YBranch => "ybranch",
            DeviceKind::SwgToStripConverter => "swg_converter",
            DeviceKind::Straight => "straight",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ybranch" | "y_branch" => Some(DeviceKind::YBranch),
            "swg_converter" | "swg" | "swg_to_strip" => Some(DeviceKind::SwgToStripConverter),
            "straight" => Some(DeviceKind::Straight),
            _ => None,
        }
    }
}

/// Propagation direction a port injects or measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    PosX,
    NegX,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::PosX => Direction::NegX,
            Direction::NegX => Direction::PosX,
        }
    }
}

/// A vertical slice through a waveguide where modes are injected or measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Port<T = f64> {
    pub name: String,
    pub x: T,
    pub y_min: T,
    pub y_max: T,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T = f64> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Real> Rect<T> {
    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// Mirror-symmetric 1x2 splitter. Lengths in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct YBranchLayout<T = f64> {
    pub input_width: T,
    pub taper_length: T,
    pub junction_width: T,
    pub arm_width: T,
    pub arm_gap: T,
    pub control_points: usize,
    /// Symmetric bound on each boundary offset.
    pub offset_bound: T,
}

impl<T: Real> Default for YBranchLayout<T> {
    fn default() -> Self {
        Self {
            input_width: T::lit(0.5),
            taper_length: T::lit(2.0),
            junction_width: T::lit(1.2),
            arm_width: T::lit(0.5),
            arm_gap: T::lit(0.2),
            control_points: 10,
            offset_bound: T::lit(0.15),
        }
    }
}

/// SWG-to-strip converter section between two strip leads. The grating teeth sit
/// in the middle of the design region; a central bridge tapers from the strip
/// width down to `bridge_tip_half_width` at the center and back. Lengths in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct SwgLayout<T = f64> {
    pub region_length: T,
    pub teeth: usize,
    pub period: T,
    pub bridge_points: usize,
    pub strip_width: T,
    pub bridge_tip_half_width: T,
    pub initial_tooth_width: T,
    pub initial_duty: T,
    /// Upper bound on tooth length as a fraction of the period.
    pub max_duty: T,
    pub tooth_width_bounds: (T, T),
    /// Bounds on bridge half-width offsets.
    pub bridge_offset_bounds: (T, T),
}

impl<T: Real> Default for SwgLayout<T> {
    fn default() -> Self {
        Self {
            region_length: T::lit(6.0),
            teeth: 15,
            period: T::lit(0.24),
            bridge_points: 8,
            strip_width: T::lit(0.5),
            bridge_tip_half_width: T::lit(BRIDGE_FLOOR),
            initial_tooth_width: T::lit(0.5),
            initial_duty: T::lit(0.5),
            max_duty: T::lit(0.75),
            tooth_width_bounds: (T::lit(0.2), T::lit(0.9)),
            bridge_offset_bounds: (T::lit(-0.03), T::lit(0.2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StraightLayout<T = f64> {
    pub width: T,
    pub length: T,
}

impl<T: Real> Default for StraightLayout<T> {
    fn default() -> Self {
        Self { width: T::lit(0.5), length: T::lit(2.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout<T = f64> {
    YBranch(YBranchLayout<T>),
    Swg(SwgLayout<T>),
    Straight(StraightLayout<T>),
}

/// A layout placed in its simulation window with ports and validation knobs.
///
/// The design region always spans `x ∈ [0, L]`; straight leads of length `lead`
/// run from the window edges to the design region. `ports[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec<T = f64> {
    pub layout: Layout<T>,
    pub domain: Rect<T>,
    pub ports: Vec<Port<T>>,
    /// Minimum drawable feature (µm) for SWG teeth and gaps.
    pub min_feature: T,
    /// Maximum spacing between sampled boundary vertices (µm).
    pub sample_step: T,
    /// Parameters whose values are ignored (held at zero offset).
    pub pinned: Vec<usize>,
}

const LEAD: f64 = 1.2;
const PORT_INSET: f64 = 0.6;
/// Keep-out band along the window edges reserved for absorbing layers.
const EDGE_BAND: f64 = 0.4;
/// Smallest bridge half-width emitted; narrower spline values are clamped.
const BRIDGE_FLOOR: f64 = 0.005;

impl<T: Real> DeviceSpec<T> {
    pub fn ybranch(layout: YBranchLayout<T>) -> Self {
        let half = T::lit(1.6);
        let len = layout.taper_length;
        Self::framed(Layout::YBranch(layout), len, half)
    }

    pub fn swg_converter(layout: SwgLayout<T>) -> Self {
        let half = T::lit(1.4);
        let len = layout.region_length;
        Self::framed(Layout::Swg(layout), len, half)
    }

    pub fn straight(layout: StraightLayout<T>) -> Self {
        let half = T::lit(1.6);
        let len = layout.length;
        Self::framed(Layout::Straight(layout), len, half)
    }

    fn framed(layout: Layout<T>, length: T, half_height: T) -> Self {
        let lead = T::lit(LEAD);
        let inset = T::lit(PORT_INSET);
        let slice = half_height - T::lit(EDGE_BAND);
        let domain = Rect { x_min: -lead, x_max: length + lead, y_min: -half_height, y_max: half_height };
        let port = |name: &str, x: T| Port { name: name.into(), x, y_min: -slice, y_max: slice, direction: Direction::PosX };
        Self {
            layout,
            domain,
            ports: vec![port("in", -lead + inset), port("out", length + lead - inset)],
            min_feature: T::lit(0.06),
            sample_step: T::lit(0.01),
            pinned: Vec::new(),
        }
    }

    pub fn kind(&self) -> DeviceKind {
        match self.layout {
            Layout::YBranch(_) => DeviceKind::YBranch,
            Layout::Swg(_) => DeviceKind::SwgToStripConverter,
            Layout::Straight(_) => DeviceKind::Straight,
        }
    }

    pub fn design_length(&self) -> T {
        match &self.layout {
            Layout::YBranch(l) => l.taper_length,
            Layout::Swg(l) => l.region_length,
            Layout::Straight(l) => l.length,
        }
    }

    /// Region whose geometry depends on the parameters.
    pub fn design_region(&self) -> Rect<T> {
        let band = T::lit(EDGE_BAND);
        Rect { x_min: T::zero(), x_max: self.design_length(), y_min: self.domain.y_min + band, y_max: self.domain.y_max - band }
    }

    pub fn param_count(&self) -> usize {
        match &self.layout {
            Layout::YBranch(l) => l.control_points,
            Layout::Swg(l) => 2 * l.teeth + l.bridge_points,
            Layout::Straight(_) => 0,
        }
    }

    /// Shared starting point and bounds: zero offsets for the Y-branch; uniform
    /// teeth at the configured duty cycle and zero bridge offsets for the SWG.
    pub fn initial_params(&self) -> DesignParams<T> {
        match &self.layout {
            Layout::YBranch(l) => {
                let n = l.control_points;
                DesignParams::new(vec![T::zero(); n], vec![-l.offset_bound; n], vec![l.offset_bound; n])
                    .expect("zero offsets lie inside symmetric bounds")
            }
            Layout::Swg(l) => {
                let k = l.teeth;
                let m = l.bridge_points;
                let fmin = self.min_feature;
                let mut values = vec![l.initial_tooth_width; k];
                values.extend(std::iter::repeat(l.initial_duty * l.period).take(k));
                values.extend(std::iter::repeat(T::zero()).take(m));
                let mut lower = vec![l.tooth_width_bounds.0; k];
                lower.extend(std::iter::repeat(fmin).take(k));
                lower.extend(std::iter::repeat(l.bridge_offset_bounds.0).take(m));
                let mut upper = vec![l.tooth_width_bounds.1; k];
                upper.extend(std::iter::repeat((l.period - fmin).min(l.max_duty * l.period)).take(k));
                upper.extend(std::iter::repeat(l.bridge_offset_bounds.1).take(m));
                DesignParams::new(values, lower, upper).expect("default SWG start lies inside its bounds")
            }
            Layout::Straight(_) => DesignParams::new(vec![], vec![], vec![]).expect("empty"),
        }
    }

    /// Geometry that never depends on the parameters.
    pub fn fixed_polygons(&self) -> PolygonSet<T> {
        let d = &self.domain;
        let len = self.design_length();
        match &self.layout {
            Layout::YBranch(l) => {
                let hw = l.input_width * T::lit(0.5);
                let g = l.arm_gap * T::lit(0.5);
                let a = g + l.arm_width;
                PolygonSet::new(vec![
                    Polygon::rect(d.x_min, -hw, T::zero(), hw),
                    Polygon::rect(len, g, d.x_max, a),
                    Polygon::rect(len, -a, d.x_max, -g),
                ])
            }
            Layout::Swg(l) => {
                let hw = l.strip_width * T::lit(0.5);
                PolygonSet::new(vec![Polygon::rect(d.x_min, -hw, T::zero(), hw), Polygon::rect(len, -hw, d.x_max, hw)])
            }
            Layout::Straight(l) => {
                let hw = l.width * T::lit(0.5);
                PolygonSet::new(vec![Polygon::rect(d.x_min, -hw, d.x_max, hw)])
            }
        }
    }

    fn effective(&self, p: &[T]) -> Result<Vec<T>, GeometryError> {
        if p.len() != self.param_count() {
            return Err(GeometryError::ParamCount { expected: self.param_count(), got: p.len() });
        }
        if let Some(k) = p.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidParams(format!("parameter {k} is not finite")));
        }
        let mut v = p.to_vec();
        for &k in &self.pinned {
            if let Some(slot) = v.get_mut(k) {
                *slot = match &self.layout {
                    Layout::Swg(l) if k < 2 * l.teeth => self.initial_params().values()[k],
                    _ => T::zero(),
                };
            }
        }
        Ok(v)
    }

    /// Full device geometry (fixed leads plus the parameterized design) for `p`.
    pub fn polygons(&self, p: &[T]) -> Result<PolygonSet<T>, GeometryError> {
        let v = self.effective(p)?;
        let mut set = self.fixed_polygons();
        match &self.layout {
            Layout::YBranch(_) => set.push(self.ybranch_body(&v)?),
            Layout::Swg(l) => set.extend(self.swg_design(l, &v)?),
            Layout::Straight(_) => {}
        }
        Ok(set)
    }

    /// Knot positions of the Y-branch boundary spline.
    pub fn ybranch_knots(&self) -> Option<Vec<T>> {
        match &self.layout {
            Layout::YBranch(l) => Some(even_knots(T::zero(), l.taper_length, l.control_points)),
            _ => None,
        }
    }

    /// Half-width of the Y-branch body along the design region for offsets `p`.
    pub fn ybranch_profile(&self, p: &[T]) -> Result<Vec<Point<T>>, GeometryError> {
        let Layout::YBranch(l) = &self.layout else {
            return Err(GeometryError::WrongKind { expected: DeviceKind::YBranch, got: self.kind() });
        };
        let v = self.effective(p)?;
        let knots = even_knots(T::zero(), l.taper_length, l.control_points);
        let spline = NaturalSpline::new(&knots, &v);
        let w0 = l.input_width * T::lit(0.5);
        let w1 = l.junction_width * T::lit(0.5);
        let y_limit = self.design_region().y_max;
        sample_with_knots(&knots, self.sample_step)
            .into_iter()
            .map(|x| {
                let base = w0 + (w1 - w0) * x / l.taper_length;
                let h = base + spline.eval(x);
                if !(h > T::zero()) || h > y_limit {
                    Err(GeometryError::SelfIntersection {
                        detail: format!("boundary half-width {h} at x = {x} µm leaves (0, {y_limit})"),
                    })
                } else {
                    Ok(Point::new(x, h))
                }
            })
            .collect()
    }

    fn ybranch_body(&self, v: &[T]) -> Result<Polygon<T>, GeometryError> {
        Ok(mirrored(self.ybranch_profile(v)?))
    }

    /// Bridge half-width profile of the SWG converter.
    fn swg_bridge(&self, l: &SwgLayout<T>, v: &[T]) -> impl Fn(T) -> T {
        let m = l.bridge_points;
        let len = l.region_length;
        let knots = even_knots(T::zero(), len, m + 2);
        let mut offs = vec![T::zero(); m + 2];
        offs[1..=m].copy_from_slice(&v[2 * l.teeth..2 * l.teeth + m]);
        let spline = NaturalSpline::new(&knots, &offs);
        let outer = l.strip_width * T::lit(0.5);
        let tip = l.bridge_tip_half_width;
        let mid = len * T::lit(0.5);
        let floor = T::lit(BRIDGE_FLOOR);
        move |x: T| {
            let t = ((x - mid) / mid).abs();
            let base = tip + (outer - tip) * t;
            (base + spline.eval(x)).max(floor)
        }
    }

    /// Start of the first grating tooth; the teeth are centered in the region.
    pub fn swg_teeth_start(&self) -> Option<T> {
        match &self.layout {
            Layout::Swg(l) => Some((l.region_length - T::from_usize_lossy(l.teeth) * l.period) * T::lit(0.5)),
            _ => None,
        }
    }

    /// Polygons of the converter section, ordered as the `K` teeth followed by the
    /// `K + 1` bridge pieces between and around them.
    fn swg_design(&self, l: &SwgLayout<T>, v: &[T]) -> Result<PolygonSet<T>, GeometryError> {
        let k = l.teeth;
        let widths = &v[..k];
        let lengths = &v[k..2 * k];
        let total: T = lengths.iter().copied().sum();
        if total > l.region_length {
            return Err(GeometryError::TeethExceedRegion {
                total: total.to_f64_lossy(),
                region: l.region_length.to_f64_lossy(),
            });
        }
        let t0 = (l.region_length - T::from_usize_lossy(k) * l.period) * T::lit(0.5);
        if t0 < T::zero() {
            return Err(GeometryError::TeethExceedRegion {
                total: (T::from_usize_lossy(k) * l.period).to_f64_lossy(),
                region: l.region_length.to_f64_lossy(),
            });
        }
        let fmin = self.min_feature;
        for i in 0..k {
            if lengths[i] > l.period {
                return Err(GeometryError::Overlap { tooth: i });
            }
            for (what, value) in [("width", widths[i]), ("length", lengths[i]), ("gap", l.period - lengths[i])] {
                if value < fmin {
                    return Err(GeometryError::MinFeature {
                        what,
                        index: i,
                        value: value.to_f64_lossy(),
                        min: fmin.to_f64_lossy(),
                    });
                }
            }
            if widths[i] * T::lit(0.5) > self.design_region().y_max {
                return Err(GeometryError::SelfIntersection { detail: format!("tooth {i} wider than design region") });
            }
        }

        let bridge = self.swg_bridge(l, v);
        let step = self.sample_step;
        let inner = |a: T, b: T| -> Vec<T> {
            let first = (a / step).floor().to_usize().unwrap_or(0) + 1;
            (first..)
                .map(|s| T::from_usize_lossy(s) * step)
                .take_while(|&x| x < b)
                .filter(|&x| x > a)
                .collect()
        };

        let mut teeth = Vec::with_capacity(k);
        let mut pieces = Vec::with_capacity(k + 1);
        let mut cursor = T::zero();
        for i in 0..k {
            let a = t0 + T::from_usize_lossy(i) * l.period;
            let b = a + lengths[i];
            pieces.push(strip_piece(&bridge, cursor, a, &inner(cursor, a)));
            teeth.push(tooth_piece(&bridge, a, b, widths[i] * T::lit(0.5), &inner(a, b)));
            cursor = b;
        }
        pieces.push(strip_piece(&bridge, cursor, l.region_length, &inner(cursor, l.region_length)));

        let mut set = PolygonSet::new(teeth);
        set.polygons.extend(pieces);
        Ok(set)
    }
}

fn mirrored<T: Real>(top: Vec<Point<T>>) -> Polygon<T> {
    let mut verts = top.clone();
    verts.extend(top.iter().rev().map(|p| Point::new(p.x, -p.y)));
    Polygon::new(verts)
}

/// Symmetric strip `|y| ≤ half(x)` over `[a, b]`.
fn strip_piece<T: Real>(half: &impl Fn(T) -> T, a: T, b: T, interior: &[T]) -> Polygon<T> {
    let mut top = Vec::with_capacity(interior.len() + 2);
    top.push(Point::new(a, half(a)));
    top.extend(interior.iter().map(|&x| Point::new(x, half(x))));
    top.push(Point::new(b, half(b)));
    mirrored(top)
}

/// Tooth `[a, b] x [-w, w]` merged with the bridge wherever the bridge is wider.
fn tooth_piece<T: Real>(bridge: &impl Fn(T) -> T, a: T, b: T, w: T, interior: &[T]) -> Polygon<T> {
    let mut xs = Vec::with_capacity(interior.len() + 2);
    xs.push(a);
    xs.extend_from_slice(interior);
    xs.push(b);
    let hb: Vec<T> = xs.iter().map(|&x| bridge(x)).collect();
    let mut top = Vec::with_capacity(xs.len() + 4);
    for s in 0..xs.len() {
        if s > 0 && (hb[s - 1] - w) * (hb[s] - w) < T::zero() {
            let t = (w - hb[s - 1]) / (hb[s] - hb[s - 1]);
            top.push(Point::new(xs[s - 1] + t * (xs[s] - xs[s - 1]), w));
        }
        top.push(Point::new(xs[s], hb[s].max(w)));
    }
    // Drop collinear interior vertices on the flat tooth face.
    let mut kept: Vec<Point<T>> = Vec::with_capacity(top.len());
    for s in 0..top.len() {
        let flat = top[s].y == w
            && s > 0
            && s + 1 < top.len()
            && top[s - 1].y == w
            && top[s + 1].y == w;
        if !flat {
            kept.push(top[s]);
        }
    }
    mirrored(kept)
}
