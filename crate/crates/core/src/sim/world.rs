use alloc::format;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

/// Axis-aligned room rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoomRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RoomRect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        RoomRect { x0, y0, x1, y1 }
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn contains_with_margin(&self, x: f64, y: f64, margin: f64) -> bool {
        x >= self.x0 + margin && x <= self.x1 - margin && y >= self.y0 + margin && y <= self.y1 - margin
    }
}

/// An opening in the wall shared by two rooms. `center` is the coordinate
/// along that wall.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DoorwaySpec {
    pub rooms: [usize; 2],
    pub center: f64,
    pub width: f64,
}

/// How landmark descriptors depend on the viewer. A landmark seen from
/// distance `d` has descriptor
/// `normalize(style·c_room + view·(cos s·u + sin s·g) + noise)` with
/// `s = view_scale·ln d`, where `c_room` is shared by a room's landmarks and
/// `u ⟂ g` are the landmark's own directions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct DescriptorModel {
    pub dim: usize,
    pub style_weight: f64,
    pub view_weight: f64,
    pub view_scale: f64,
    pub noise_sigma: f64,
}

impl Default for DescriptorModel {
    fn default() -> Self {
        DescriptorModel { dim: 64, style_weight: 0.6, view_weight: 0.8, view_scale: 1.0, noise_sigma: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct WorldSpec {
    pub seed: u64,
    pub rooms: Vec<RoomRect>,
    pub doorways: Vec<DoorwaySpec>,
    pub landmarks_per_room: usize,
    pub descriptor: DescriptorModel,
    pub fov: f64,
    pub range: f64,
    /// Robot radius: how close the robot centre may come to a wall.
    pub clearance: f64,
    /// Fraction of landmarks per room whose descriptors are resampled.
    pub perturb_p: f64,
    /// Fraction of landmarks per room moved to a new wall position.
    pub perturb_q: f64,
    pub perturb_seed: u64,
}

/// Edge length of a room in the default world.
pub const DEFAULT_ROOM_SIZE: f64 = 3.5;

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec::default_world(0)
    }
}

impl WorldSpec {
    /// Four rooms in a 2×2 grid joined in a cycle 0–1–2–3–0, two doorways
    /// per room.
    ///
    /// ```text
    ///  3 | 2
    ///  --+--
    ///  0 | 1
    /// ```
    pub fn default_world(seed: u64) -> Self {
        let s = DEFAULT_ROOM_SIZE;
        let door = 1.2;
        WorldSpec {
            seed,
            rooms: alloc::vec![
                RoomRect::new(0.0, 0.0, s, s),
                RoomRect::new(s, 0.0, 2.0 * s, s),
                RoomRect::new(s, s, 2.0 * s, 2.0 * s),
                RoomRect::new(0.0, s, s, 2.0 * s),
            ],
            doorways: alloc::vec![
                DoorwaySpec { rooms: [0, 1], center: 0.5 * s, width: door },
                DoorwaySpec { rooms: [1, 2], center: 1.5 * s, width: door },
                DoorwaySpec { rooms: [2, 3], center: 1.5 * s, width: door },
                DoorwaySpec { rooms: [3, 0], center: 0.5 * s, width: door },
            ],
            landmarks_per_room: 40,
            descriptor: DescriptorModel::default(),
            fov: core::f64::consts::FRAC_PI_2,
            range: 6.0,
            clearance: 0.2,
            perturb_p: 0.0,
            perturb_q: 0.0,
            perturb_seed: 0,
        }
    }
}

/// A wall segment `coord = const` along `axis`, spanning `[lo, hi]` in the
/// other coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    /// `true` for a wall of constant x.
    pub vertical: bool,
    pub coord: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Wall {
    /// Point on the wall at parameter `t` along it.
    pub fn point(&self, t: f64) -> (f64, f64) {
        if self.vertical {
            (self.coord, t)
        } else {
            (t, self.coord)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Door {
    pub rooms: [usize; 2],
    pub wall: Wall,
}

impl Door {
    pub fn center(&self) -> (f64, f64) {
        self.wall.point(0.5 * (self.wall.lo + self.wall.hi))
    }

    pub fn width(&self) -> f64 {
        self.wall.hi - self.wall.lo
    }

    pub fn connects(&self, a: usize, b: usize) -> bool {
        self.rooms == [a, b] || self.rooms == [b, a]
    }

    pub fn other(&self, room: usize) -> Option<usize> {
        match self.rooms {
            [a, b] if a == room => Some(b),
            [a, b] if b == room => Some(a),
            _ => None,
        }
    }

    /// Whether the segment `p → q` passes through the opening.
    pub fn crossed_by(&self, p: (f64, f64), q: (f64, f64)) -> bool {
        let (pa, pb, qa, qb) = if self.wall.vertical { (p.0, p.1, q.0, q.1) } else { (p.1, p.0, q.1, q.0) };
        let c = self.wall.coord;
        if (pa - c) * (qa - c) > 0.0 || pa == qa {
            return false;
        }
        let t = (c - pa) / (qa - pa);
        let along = pb + t * (qb - pb);
        along >= self.wall.lo && along <= self.wall.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    /// Global keypoint id: `room · L + k`.
    pub id: u32,
    pub room: usize,
    pub position: (f64, f64),
    pub height: f64,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    spec: WorldSpec,
    doors: Vec<Door>,
    styles: Vec<Vec<f64>>,
    landmarks: Vec<Landmark>,
}

fn tag(name: &[u8]) -> u64 {
    name.iter().fold(0u64, |h, &b| h.rotate_left(8) ^ b as u64)
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> Option<(f64, f64)> {
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    (hi > lo).then_some((lo, hi))
}

/// The wall two rooms share, if they touch along a segment.
fn shared_wall(a: &RoomRect, b: &RoomRect) -> Option<Wall> {
    const EPS: f64 = 1e-9;
    if (a.x1 - b.x0).abs() < EPS || (b.x1 - a.x0).abs() < EPS {
        let coord = if (a.x1 - b.x0).abs() < EPS { a.x1 } else { a.x0 };
        let (lo, hi) = overlap(a.y0, a.y1, b.y0, b.y1)?;
        return Some(Wall { vertical: true, coord, lo, hi });
    }
    if (a.y1 - b.y0).abs() < EPS || (b.y1 - a.y0).abs() < EPS {
        let coord = if (a.y1 - b.y0).abs() < EPS { a.y1 } else { a.y0 };
        let (lo, hi) = overlap(a.x0, a.x1, b.x0, b.x1)?;
        return Some(Wall { vertical: false, coord, lo, hi });
    }
    None
}

impl World {
    /// Validates the spec, places landmarks and applies the spec's
    /// perturbation.
    pub fn new(spec: WorldSpec) -> Result<Self> {
        let doors = validate(&spec)?;
        let mut r = rng::rng_from(rng::derive_seed(spec.seed, tag(b"styles")));
        let dim = spec.descriptor.dim;
        let styles: Vec<Vec<f64>> = (0..spec.rooms.len()).map(|_| rng::unit_vec(&mut r, dim)).collect();
        let mut world = World { spec, doors, styles, landmarks: Vec::new() };
        let mut r = rng::rng_from(rng::derive_seed(world.spec.seed, tag(b"landmarks")));
        for room in 0..world.spec.rooms.len() {
            let walls = world.free_walls(room);
            let total: f64 = walls.iter().map(|w| w.hi - w.lo).sum();
            let n = world.spec.landmarks_per_room;
            for k in 0..n {
                let at = (k as f64 + r.random_range(0.1..0.9)) / n as f64 * total;
                let position = point_on_walls(&walls, at);
                let height = r.random_range(0.2..1.8);
                let (u, g) = view_directions(&mut r, &world.styles[room]);
                world.landmarks.push(Landmark {
                    id: (room * n + k) as u32,
                    room,
                    position,
                    height,
                    u,
                    g,
                });
            }
        }
        let (p, q, seed) = (world.spec.perturb_p, world.spec.perturb_q, world.spec.perturb_seed);
        if p > 0.0 || q > 0.0 {
            world = world.perturbed(p, q, seed);
            world.spec.perturb_p = p;
            world.spec.perturb_q = q;
            world.spec.perturb_seed = seed;
        }
        Ok(world)
    }

    pub fn default_world(seed: u64) -> Self {
        World::new(WorldSpec::default_world(seed)).expect("default world is valid")
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn room_count(&self) -> usize {
        self.spec.rooms.len()
    }

    pub fn rooms(&self) -> &[RoomRect] {
        &self.spec.rooms
    }

    pub fn doors(&self) -> &[Door] {
        &self.doors
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn style(&self, room: usize) -> &[f64] {
        &self.styles[room]
    }

    pub fn descriptor_dim(&self) -> usize {
        self.spec.descriptor.dim
    }

    /// Ground-truth room containing a point.
    pub fn room_of(&self, x: f64, y: f64) -> Option<usize> {
        self.spec.rooms.iter().position(|r| r.contains(x, y))
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.doors.iter().any(|d| d.connects(a, b))
    }

    /// Row-major `m × m` doorway adjacency.
    pub fn adjacency(&self) -> Vec<bool> {
        let m = self.room_count();
        (0..m * m).map(|k| self.is_adjacent(k / m, k % m)).collect()
    }

    /// Walls of `room` with doorway openings cut out, in a fixed order
    /// (south, east, north, west).
    fn free_walls(&self, room: usize) -> Vec<Wall> {
        let r = self.spec.rooms[room];
        let sides = [
            Wall { vertical: false, coord: r.y0, lo: r.x0, hi: r.x1 },
            Wall { vertical: true, coord: r.x1, lo: r.y0, hi: r.y1 },
            Wall { vertical: false, coord: r.y1, lo: r.x0, hi: r.x1 },
            Wall { vertical: true, coord: r.x0, lo: r.y0, hi: r.y1 },
        ];
        let margin = 0.05;
        let mut out = Vec::new();
        for side in sides {
            let mut cuts: Vec<(f64, f64)> = self
                .doors
                .iter()
                .filter(|d| d.rooms.contains(&room))
                .filter(|d| d.wall.vertical == side.vertical && (d.wall.coord - side.coord).abs() < 1e-9)
                .map(|d| (d.wall.lo - margin, d.wall.hi + margin))
                .collect();
            cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut lo = side.lo + margin;
            for (c0, c1) in cuts {
                if c0 > lo {
                    out.push(Wall { lo, hi: c0, ..side });
                }
                lo = lo.max(c1);
            }
            if side.hi - margin > lo {
                out.push(Wall { lo, hi: side.hi - margin, ..side });
            }
        }
        out
    }

    /// Resamples the view directions of `round(p·L)` landmarks per room and
    /// moves `round(q·L)` landmarks to new wall positions. Rooms and
    /// doorways are untouched. `p = q = 0` returns an identical world.
    pub fn perturbed(&self, p: f64, q: f64, seed: u64) -> World {
        let mut out = self.clone();
        let n = self.spec.landmarks_per_room;
        let mut r = rng::rng_from(rng::derive_seed(seed, tag(b"perturb")));
        for room in 0..self.room_count() {
            let walls = self.free_walls(room);
            let total: f64 = walls.iter().map(|w| w.hi - w.lo).sum();
            let resample = sample(&mut r, n, (libm::round(p * n as f64) as usize).min(n));
            let mut resample: Vec<usize> = resample.into_iter().collect();
            resample.sort_unstable();
            for k in resample {
                let (u, g) = view_directions(&mut r, &self.styles[room]);
                let lm = &mut out.landmarks[room * n + k];
                lm.u = u;
                lm.g = g;
            }
            let displace = sample(&mut r, n, (libm::round(q * n as f64) as usize).min(n));
            let mut displace: Vec<usize> = displace.into_iter().collect();
            displace.sort_unstable();
            for k in displace {
                let at = r.random_range(0.0..total);
                out.landmarks[room * n + k].position = point_on_walls(&walls, at);
            }
        }
        out
    }

    /// SHA-256 of a canonical byte encoding of geometry and landmarks,
    /// truncated to 64 bits.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.spec.seed.to_le_bytes());
        self.hash_geometry(&mut h);
        h.update((self.spec.descriptor.dim as u64).to_le_bytes());
        for v in [
            self.spec.descriptor.style_weight,
            self.spec.descriptor.view_weight,
            self.spec.descriptor.view_scale,
            self.spec.descriptor.noise_sigma,
            self.spec.fov,
            self.spec.range,
            self.spec.clearance,
        ] {
            h.update(v.to_le_bytes());
        }
        for s in &self.styles {
            s.iter().for_each(|v| h.update(v.to_le_bytes()));
        }
        for lm in &self.landmarks {
            h.update(lm.id.to_le_bytes());
            h.update((lm.room as u64).to_le_bytes());
            for v in [lm.position.0, lm.position.1, lm.height].iter().chain(&lm.u).chain(&lm.g) {
                h.update(v.to_le_bytes());
            }
        }
        truncate(h.finalize().as_slice())
    }

    /// Hash of rooms and doorways only.
    pub fn adjacency_hash(&self) -> u64 {
        let mut h = Sha256::new();
        self.hash_geometry(&mut h);
        truncate(h.finalize().as_slice())
    }

    fn hash_geometry(&self, h: &mut Sha256) {
        h.update((self.spec.rooms.len() as u64).to_le_bytes());
        for r in &self.spec.rooms {
            for v in [r.x0, r.y0, r.x1, r.y1] {
                h.update(v.to_le_bytes());
            }
        }
        h.update((self.doors.len() as u64).to_le_bytes());
        for d in &self.doors {
            h.update((d.rooms[0] as u64).to_le_bytes());
            h.update((d.rooms[1] as u64).to_le_bytes());
            h.update(d.wall.lo.to_le_bytes());
            h.update(d.wall.hi.to_le_bytes());
        }
    }
}

fn truncate(digest: &[u8]) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

fn view_directions<R: Rng + ?Sized>(r: &mut R, style: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u = rng::orthogonal_unit_vec(r, style.len(), &[style]);
    let g = rng::orthogonal_unit_vec(r, style.len(), &[style, &u]);
    (u, g)
}

fn point_on_walls(walls: &[Wall], mut at: f64) -> (f64, f64) {
    for w in walls {
        let len = w.hi - w.lo;
        if at <= len {
            return w.point(w.lo + at);
        }
        at -= len;
    }
    let last = walls.last().expect("room has free wall");
    last.point(last.hi)
}

/// Perturbs an existing world (see [`World::perturbed`]).
pub fn perturb(world: &World, p: f64, q: f64, seed: u64) -> Result<World> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidWorld(format!("perturbation fractions must lie in [0, 1], got p = {p}, q = {q}")));
    }
    let mut out = world.perturbed(p, q, seed);
    out.spec.perturb_p = p;
    out.spec.perturb_q = q;
    out.spec.perturb_seed = seed;
    if p == 0.0 && q == 0.0 {
        out.spec = world.spec.clone();
    }
    Ok(out)
}

fn validate(spec: &WorldSpec) -> Result<Vec<Door>> {
    let bad = |msg: alloc::string::String| Err(Error::InvalidWorld(msg));
    let m = spec.rooms.len();
    if m == 0 || m > 255 {
        return bad(format!("need 1 to 255 rooms, got {m}"));
    }
    if spec.landmarks_per_room == 0 || spec.descriptor.dim < 2 {
        return bad("need landmarks and descriptors of length ≥ 2".into());
    }
    if (m * spec.landmarks_per_room) as u64 >= u32::MAX as u64 {
        return bad("too many landmarks".into());
    }
    if !(0.0..=1.0).contains(&spec.perturb_p) || !(0.0..=1.0).contains(&spec.perturb_q) {
        return bad(format!("perturbation fractions must lie in [0, 1], got p = {}, q = {}", spec.perturb_p, spec.perturb_q));
    }
    if !(spec.fov > 0.0 && spec.fov < core::f64::consts::PI && spec.range > 0.0 && spec.clearance >= 0.0) {
        return bad("need 0 < fov < π, range > 0, clearance ≥ 0".into());
    }
    let d = &spec.descriptor;
    if !(d.style_weight >= 0.0 && d.view_weight >= 0.0 && d.noise_sigma >= 0.0 && d.view_scale.is_finite()) {
        return bad("descriptor weights must be non-negative".into());
    }
    for (i, r) in spec.rooms.iter().enumerate() {
        if !(r.x1 - r.x0 > 2.0 * spec.clearance && r.y1 - r.y0 > 2.0 * spec.clearance) {
            return bad(format!("room {i} is degenerate"));
        }
        for (j, o) in spec.rooms.iter().enumerate().skip(i + 1) {
            if overlap(r.x0, r.x1, o.x0, o.x1).is_some() && overlap(r.y0, r.y1, o.y0, o.y1).is_some() {
                return bad(format!("rooms {i} and {j} overlap"));
            }
        }
    }
    let mut doors = Vec::new();
    for ds in &spec.doorways {
        let [a, b] = ds.rooms;
        if a >= m || b >= m || a == b {
            return bad(format!("doorway joins invalid rooms {a} and {b}"));
        }
        let Some(wall) = shared_wall(&spec.rooms[a], &spec.rooms[b]) else {
            return bad(format!("rooms {a} and {b} share no wall"));
        };
        let (lo, hi) = (ds.center - 0.5 * ds.width, ds.center + 0.5 * ds.width);
        if !(ds.width > 2.0 * spec.clearance) || lo < wall.lo || hi > wall.hi {
            return bad(format!("doorway {a}–{b} does not fit its wall"));
        }
        doors.push(Door { rooms: ds.rooms, wall: Wall { lo, hi, ..wall } });
    }
    // Every room must be reachable through doorways.
    let mut seen = alloc::vec![false; m];
    let mut stack = alloc::vec![0usize];
    seen[0] = true;
    while let Some(r) = stack.pop() {
        for o in doors.iter().filter_map(|d| d.other(r)) {
            if !core::mem::replace(&mut seen[o], true) {
                stack.push(o);
            }
        }
    }
    if seen.contains(&false) {
        return Err(Error::GraphNotConnected);
    }
    Ok(doors)
}
