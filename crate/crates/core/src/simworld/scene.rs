use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::heightmap::{Heightmap, RgbMap, BELT_GRAY};
use crate::{Error, ObjectClass, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `length` runs along the yaw direction.
    Box { length: f64, width: f64 },
    Disc { diameter: f64 },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Box { .. } => "box",
            Shape::Disc { .. } => "disc",
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Box { length, width } => length * width,
            Shape::Disc { diameter } => std::f64::consts::PI * diameter * diameter / 4.0,
        }
    }

    /// Dimensions as written to scene files: (w, h); a disc stores its
    /// diameter twice.
    fn dims(&self) -> (f64, f64) {
        match *self {
            Shape::Box { length, width } => (length, width),
            Shape::Disc { diameter } => (diameter, diameter),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub rest_height: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimObject {
    pub id: u32,
    pub class: ObjectClass,
    pub shape: Shape,
    pub thickness: f64,
    /// kg
    pub mass: f64,
    pub pose: Pose,
    pub color: [u8; 3],
}

impl SimObject {
    pub fn top(&self) -> f64 {
        self.pose.rest_height + self.thickness
    }

    /// Point-in-footprint test, mm.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let dx = px - self.pose.x;
        let dy = py - self.pose.y;
        match self.shape {
            Shape::Box { length, width } => {
                let (s, c) = self.pose.yaw.sin_cos();
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                u.abs() <= length / 2.0 && v.abs() <= width / 2.0
            }
            Shape::Disc { diameter } => dx * dx + dy * dy <= diameter * diameter / 4.0,
        }
    }

    /// Half extent of the footprint along the unit direction `(ax, ay)`.
    pub fn half_extent(&self, ax: f64, ay: f64) -> f64 {
        match self.shape {
            Shape::Box { length, width } => {
                let (s, c) = self.pose.yaw.sin_cos();
                let along = (c * ax + s * ay).abs();
                let across = (-s * ax + c * ay).abs();
                length / 2.0 * along + width / 2.0 * across
            }
            Shape::Disc { diameter } => diameter / 2.0,
        }
    }

    /// Footprint projection `[min, max]` on the axis through `origin` with
    /// unit direction `dir`.
    pub fn project(&self, origin: (f64, f64), dir: (f64, f64)) -> (f64, f64) {
        let c = (self.pose.x - origin.0) * dir.0 + (self.pose.y - origin.1) * dir.1;
        let e = self.half_extent(dir.0, dir.1);
        (c - e, c + e)
    }

    /// Axis-aligned bounding box (x0, y0, x1, y1), mm.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let ex = self.half_extent(1.0, 0.0);
        let ey = self.half_extent(0.0, 1.0);
        (self.pose.x - ex, self.pose.y - ey, self.pose.x + ex, self.pose.y + ey)
    }
}

/// Objects on the working-area belt, kept in drop order.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SimObject>,
    pub width_px: usize,
    pub height_px: usize,
    pub resolution: f64,
    next_id: u32,
}

impl Scene {
    pub fn new(width_px: usize, height_px: usize, resolution: f64) -> Self {
        Scene {
            objects: Vec::new(),
            width_px,
            height_px,
            resolution,
            next_id: 0,
        }
    }

    pub fn width_mm(&self) -> f64 {
        self.width_px as f64 * self.resolution
    }

    pub fn height_mm(&self) -> f64 {
        self.height_px as f64 * self.resolution
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width_mm() && y < self.height_mm()
    }

    /// Grid cells whose centres lie inside the object's footprint.
    pub fn cells(&self, obj: &SimObject) -> Vec<usize> {
        let r = self.resolution;
        let (x0, y0, x1, y1) = obj.bbox();
        let cx0 = ((x0 / r - 0.5).floor().max(0.0)) as usize;
        let cy0 = ((y0 / r - 0.5).floor().max(0.0)) as usize;
        let cx1 = ((x1 / r - 0.5).ceil().max(-1.0) as isize).min(self.width_px as isize - 1);
        let cy1 = ((y1 / r - 0.5).ceil().max(-1.0) as isize).min(self.height_px as isize - 1);
        let mut out = Vec::new();
        for cy in cy0 as isize..=cy1 {
            for cx in cx0 as isize..=cx1 {
                let (px, py) = ((cx as f64 + 0.5) * r, (cy as f64 + 0.5) * r);
                if obj.contains(px, py) {
                    out.push(cy as usize * self.width_px + cx as usize);
                }
            }
        }
        out
    }

    /// Drops a new object: it comes to rest on the highest surface under its
    /// footprint. Returns the new id.
    #[allow(clippy::too_many_arguments)]
    pub fn drop_object(
        &mut self,
        class: ObjectClass,
        shape: Shape,
        thickness: f64,
        mass: f64,
        x: f64,
        y: f64,
        yaw: f64,
        color: [u8; 3],
    ) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        let mut obj = SimObject {
            id,
            class,
            shape,
            thickness,
            mass,
            pose: Pose {
                x,
                y,
                rest_height: 0.0,
                yaw,
            },
            color,
        };
        obj.pose.rest_height = self.surface_under(&obj);
        self.objects.push(obj);
        id
    }

    /// Re-appends an existing object (keeping its id) at a new position.
    pub(crate) fn redrop(&mut self, mut obj: SimObject, x: f64, y: f64) {
        obj.pose.x = x;
        obj.pose.y = y;
        obj.pose.rest_height = self.surface_under(&obj);
        self.objects.push(obj);
    }

    fn surface_under(&self, obj: &SimObject) -> f64 {
        let cells = self.cells(obj);
        if cells.is_empty() {
            return 0.0;
        }
        let (hm, _) = self.rasterize();
        cells.iter().map(|&c| hm.data()[c]).fold(0.0, f64::max)
    }

    /// Recomputes every rest height in drop order. Removing an object lets
    /// whatever rested on it fall onto the next surface below.
    pub fn settle(&mut self) {
        let mut grid = vec![0.0f64; self.width_px * self.height_px];
        for i in 0..self.objects.len() {
            let cells = self.cells(&self.objects[i]);
            let rest = cells.iter().map(|&c| grid[c]).fold(0.0, f64::max);
            let obj = &mut self.objects[i];
            obj.pose.rest_height = rest;
            let top = obj.top();
            for c in cells {
                grid[c] = grid[c].max(top);
            }
        }
    }

    /// Ground-truth top surface and colour.
    pub fn rasterize(&self) -> (Heightmap, RgbMap) {
        let mut hm = Heightmap::zeros(self.width_px, self.height_px, self.resolution);
        let mut rgb = RgbMap::filled(self.width_px, self.height_px, BELT_GRAY);
        for obj in &self.objects {
            let top = obj.top();
            for c in self.cells(obj) {
                let (x, y) = (c % self.width_px, c / self.width_px);
                if top >= hm.get(x, y) {
                    hm.set(x, y, top);
                    rgb.set(x, y, obj.color);
                }
            }
        }
        (hm, rgb)
    }

    /// Ids of objects resting (directly or transitively) on any of `ids`.
    pub fn supported_by(&self, ids: &[u32]) -> Vec<u32> {
        let mut carriers: Vec<(Vec<usize>, f64)> = self
            .objects
            .iter()
            .filter(|o| ids.contains(&o.id))
            .map(|o| {
                let mut c = self.cells(o);
                c.sort_unstable();
                (c, o.top())
            })
            .collect();
        let mut out = Vec::new();
        for o in &self.objects {
            if ids.contains(&o.id) {
                continue;
            }
            let cells = self.cells(o);
            let resting = carriers.iter().any(|(cc, top)| {
                (o.pose.rest_height - top).abs() < 1e-6 && cells.iter().any(|c| cc.binary_search(c).is_ok())
            });
            if resting {
                out.push(o.id);
                let mut c = cells;
                c.sort_unstable();
                carriers.push((c, o.top()));
            }
        }
        out
    }

    /// Share of footprint area per sortable class.
    pub fn class_area_share(&self) -> [f64; 3] {
        let mut area = [0.0; 3];
        for o in &self.objects {
            if o.class != ObjectClass::Unknown {
                area[o.class.index()] += o.shape.area();
            }
        }
        let total: f64 = area.iter().sum();
        if total > 0.0 {
            area.iter_mut().for_each(|a| *a /= total);
        }
        area
    }

    /// One object per line: `id,class,shape,w,h,thickness,mass,x,y,yaw,r,g,b`
    /// in drop order. Rest heights are not stored; loading re-drops the
    /// objects in file order.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# scene {} {} {}", self.width_px, self.height_px, self.resolution)?;
        writeln!(w, "# id,class,shape,w,h,thickness,mass,x,y,yaw,r,g,b")?;
        for o in &self.objects {
            let (dw, dh) = o.shape.dims();
            let mut line = String::new();
            write!(
                line,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                o.id,
                o.class,
                o.shape.name(),
                dw,
                dh,
                o.thickness,
                o.mass,
                o.pose.x,
                o.pose.y,
                o.pose.yaw,
                o.color[0],
                o.color[1],
                o.color[2]
            )
            .expect("string write");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the format written by [`Scene::write_text`]. The colour columns
    /// are optional; without them the class base colour is used.
    pub fn read_text<R: BufRead>(r: R, default_dims: (usize, usize, f64)) -> Result<Self> {
        let mut scene = Scene::new(default_dims.0, default_dims.1, default_dims.2);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let t = line.trim();
            if let Some(rest) = t.strip_prefix("# scene ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() == 3 {
                    let bad = |_| Error::parse(lineno, "bad scene header");
                    scene.width_px = f[0].parse().map_err(bad)?;
                    scene.height_px = f[1].parse().map_err(bad)?;
                    scene.resolution = f[2].parse().map_err(|_| Error::parse(lineno, "bad scene header"))?;
                }
                continue;
            }
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = t.split(',').map(str::trim).collect();
            if f.len() != 10 && f.len() != 13 {
                return Err(Error::parse(lineno, format!("expected 10 or 13 fields, got {}", f.len())));
            }
            let num = |k: usize| -> Result<f64> {
                f[k].parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad number {:?}", f[k])))
            };
            let id: u32 = f[0].parse().map_err(|_| Error::parse(lineno, "bad id"))?;
            let class: ObjectClass = f[1].parse().map_err(|_| Error::parse(lineno, "bad class"))?;
            let (w, h) = (num(3)?, num(4)?);
            let shape = match f[2] {
                "box" => Shape::Box { length: w, width: h },
                "disc" => Shape::Disc { diameter: w },
                other => return Err(Error::parse(lineno, format!("bad shape {other:?}"))),
            };
            let color = if f.len() == 13 {
                let c = |k: usize| -> Result<u8> {
                    f[k].parse().map_err(|_| Error::parse(lineno, "bad colour"))
                };
                [c(10)?, c(11)?, c(12)?]
            } else {
                base_color(class)
            };
            let mut obj = SimObject {
                id,
                class,
                shape,
                thickness: num(5)?,
                mass: num(6)?,
                pose: Pose {
                    x: num(7)?,
                    y: num(8)?,
                    rest_height: 0.0,
                    yaw: num(9)?,
                },
                color,
            };
            if !(obj.thickness > 0.0 && obj.mass > 0.0) {
                return Err(Error::parse(lineno, "thickness and mass must be positive"));
            }
            obj.pose.rest_height = scene.surface_under(&obj);
            scene.next_id = scene.next_id.max(id + 1);
            scene.objects.push(obj);
        }
        Ok(scene)
    }
}

pub(crate) fn base_color(class: ObjectClass) -> [u8; 3] {
    match class {
        ObjectClass::Red => [215, 35, 35],
        ObjectClass::Yellow => [225, 195, 35],
        ObjectClass::BlueGreen => [25, 150, 165],
        ObjectClass::Unknown => BELT_GRAY,
    }
}

/// Random pile parameters. Lengths in mm, densities in g/cm³.
#[derive(Debug, Clone, PartialEq)]
pub struct PileConfig {
    pub count_min: usize,
    pub count_max: usize,
    pub center: (f64, f64),
    pub extent: (f64, f64),
    /// Relative weights for red, yellow, blue-green.
    pub class_mix: [f64; 3],
    pub box_fraction: f64,
    pub box_side: (f64, f64),
    pub disc_diameter: (f64, f64),
    pub thickness: (f64, f64),
    pub density: (f64, f64),
    pub mass_clamp: (f64, f64),
    /// Uniform per-channel colour jitter, ±.
    pub color_jitter: u8,
}

impl Default for PileConfig {
    fn default() -> Self {
        PileConfig {
            count_min: 8,
            count_max: 14,
            center: (1000.0, 750.0),
            extent: (450.0, 350.0),
            class_mix: [0.5, 0.3, 0.2],
            box_fraction: 0.7,
            box_side: (40.0, 150.0),
            disc_diameter: (40.0, 120.0),
            thickness: (15.0, 60.0),
            density: (0.3, 2.4),
            mass_clamp: (0.05, 4.5),
            color_jitter: 12,
        }
    }
}

impl PileConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(a, b): (f64, f64)| a > 0.0 && a <= b;
        if self.count_min > self.count_max {
            return Err(Error::Config("pile count_min exceeds count_max".into()));
        }
        if self.class_mix.iter().any(|w| *w < 0.0) || self.class_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("class mix needs a positive weight".into()));
        }
        for (name, r) in [
            ("box_side", self.box_side),
            ("disc_diameter", self.disc_diameter),
            ("thickness", self.thickness),
            ("density", self.density),
            ("mass_clamp", self.mass_clamp),
        ] {
            if !range_ok(r) {
                return Err(Error::Config(format!("invalid {name} range {r:?}")));
            }
        }
        if !(0.0..=1.0).contains(&self.box_fraction) {
            return Err(Error::Config("box_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }

    fn draw_class<R: Rng + ?Sized>(&self, rng: &mut R) -> ObjectClass {
        let total: f64 = self.class_mix.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, w) in self.class_mix.iter().enumerate() {
            if u < *w {
                return ObjectClass::SORTABLE[i];
            }
            u -= w;
        }
        ObjectClass::SORTABLE[2]
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl Scene {
    /// Drops a fresh random pile on top of whatever is already there.
    pub fn add_pile<R: Rng + ?Sized>(&mut self, cfg: &PileConfig, rng: &mut R) {
        let count = rng.random_range(cfg.count_min..=cfg.count_max);
        for _ in 0..count {
            let class = cfg.draw_class(rng);
            let shape = if rng.random::<f64>() < cfg.box_fraction {
                Shape::Box {
                    length: uniform(rng, cfg.box_side),
                    width: uniform(rng, cfg.box_side),
                }
            } else {
                Shape::Disc {
                    diameter: uniform(rng, cfg.disc_diameter),
                }
            };
            let thickness = uniform(rng, cfg.thickness);
            let density = uniform(rng, cfg.density);
            // mm³ · g/cm³ → kg
            let mass = (shape.area() * thickness * 1e-3 * density * 1e-3)
                .clamp(cfg.mass_clamp.0, cfg.mass_clamp.1);
            let x = cfg.center.0 + (rng.random::<f64>() - 0.5) * cfg.extent.0;
            let y = cfg.center.1 + (rng.random::<f64>() - 0.5) * cfg.extent.1;
            let yaw = rng.random::<f64>() * std::f64::consts::PI;
            let j = cfg.color_jitter as i16;
            let base = base_color(class);
            let mut color = [0u8; 3];
            for (c, b) in color.iter_mut().zip(base) {
                let d = if j > 0 { rng.random_range(-j..=j) } else { 0 };
                *c = (b as i16 + d).clamp(0, 255) as u8;
            }
            self.drop_object(class, shape, thickness, mass, x, y, yaw, color);
        }
    }
}

/// A new random pile on an empty belt.
pub fn generate_pile<R: Rng + ?Sized>(
    width_px: usize,
    height_px: usize,
    resolution: f64,
    cfg: &PileConfig,
    rng: &mut R,
) -> Scene {
    let mut scene = Scene::new(width_px, height_px, resolution);
    scene.add_pile(cfg, rng);
    scene
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::HsvBoxes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_box(scene: &mut Scene, class: ObjectClass, x: f64, y: f64, t: f64) -> u32 {
        scene.drop_object(
            class,
            Shape::Box { length: 60.0, width: 40.0 },
            t,
            0.3,
            x,
            y,
            0.0,
            base_color(class),
        )
    }

    #[test]
    fn empty_and_single_piles() {
        let mut cfg = PileConfig { count_min: 0, count_max: 0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(generate_pile(400, 300, 5.0, &cfg, &mut rng).is_empty());
        cfg.count_min = 1;
        cfg.count_max = 1;
        let s = generate_pile(400, 300, 5.0, &cfg, &mut rng);
        assert_eq!(s.len(), 1);
        assert_eq!(s.objects[0].pose.rest_height, 0.0);
    }

    #[test]
    fn overlapping_objects_stack() {
        let mut s = Scene::new(100, 100, 5.0);
        small_box(&mut s, ObjectClass::Red, 250.0, 250.0, 30.0);
        small_box(&mut s, ObjectClass::Yellow, 260.0, 255.0, 20.0);
        assert_eq!(s.objects[1].pose.rest_height, 30.0);
        assert_eq!(s.objects[1].top(), 50.0);
        // Removing the bottom one lets the top one fall.
        s.objects.remove(0);
        s.settle();
        assert_eq!(s.objects[0].pose.rest_height, 0.0);
    }

    #[test]
    fn supported_by_is_transitive() {
        let mut s = Scene::new(100, 100, 5.0);
        let a = small_box(&mut s, ObjectClass::Red, 250.0, 250.0, 30.0);
        let b = small_box(&mut s, ObjectClass::Yellow, 260.0, 250.0, 20.0);
        let c = small_box(&mut s, ObjectClass::BlueGreen, 270.0, 250.0, 10.0);
        small_box(&mut s, ObjectClass::Red, 400.0, 400.0, 10.0);
        assert_eq!(s.supported_by(&[a]), vec![b, c]);
    }

    #[test]
    fn piles_are_deterministic_and_non_interpenetrating() {
        let cfg = PileConfig::default();
        let a = generate_pile(400, 300, 5.0, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = generate_pile(400, 300, 5.0, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        for (i, o) in a.objects.iter().enumerate() {
            let mine = a.cells(o);
            for under in &a.objects[..i] {
                let theirs = a.cells(under);
                if mine.iter().any(|c| theirs.contains(c)) {
                    assert!(o.pose.rest_height >= under.top() - 1e-9);
                }
            }
        }
    }

    #[test]
    fn jittered_colours_stay_in_their_boxes() {
        let boxes = HsvBoxes::default();
        let cfg = PileConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut total = 0;
        let mut inside = 0;
        for _ in 0..50 {
            let s = generate_pile(400, 300, 5.0, &cfg, &mut rng);
            for o in &s.objects {
                total += 1;
                inside += (boxes.classify(o.color) == o.class) as usize;
            }
        }
        assert!(inside as f64 >= 0.98 * total as f64, "{inside}/{total}");
    }

    #[test]
    fn text_round_trip_restores_geometry() {
        let s = generate_pile(400, 300, 5.0, &PileConfig::default(), &mut ChaCha8Rng::seed_from_u64(4));
        let mut buf = Vec::new();
        s.write_text(&mut buf).unwrap();
        let back = Scene::read_text(&buf[..], (1, 1, 1.0)).unwrap();
        assert_eq!(back.len(), s.len());
        assert_eq!(back.rasterize(), s.rasterize());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Scene::read_text("0,red,box,1,2,3\n".as_bytes(), (10, 10, 5.0)).is_err());
        assert!(Scene::read_text("0,purple,box,1,2,3,4,5,6,7\n".as_bytes(), (10, 10, 5.0)).is_err());
        assert!(Scene::read_text("0,red,box,1,2,0,4,5,6,7\n".as_bytes(), (10, 10, 5.0)).is_err());
    }
}
