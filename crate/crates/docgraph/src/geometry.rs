//! Rectangle gap distance, eight-sector directions, and the
//! direction line-of-sight (D-LoS) neighbor computation.
//!
//! The 360-degree horizon around a source box is split into eight 45-degree
//! sectors; sector 0 is centered on East and indices proceed counter-clockwise
//! (1 = NE, 2 = N, ..., 7 = SE). Page coordinates follow the image convention
//! (y grows downward), so "North" means smaller y.

use crate::doc_model::{BBox, Document};
use thiserror::Error;

pub const SECTOR_COUNT: usize = 8;

/// One of the eight 45-degree direction sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sector(u8);

impl Sector {
    pub fn new(index: u8) -> Option<Self> {
        (index < 8).then_some(Sector(index))
    }

    pub fn index(&self) -> usize {
        self.0 as usize
    }

    pub fn name(&self) -> &'static str {
        ["E", "NE", "N", "NW", "W", "SW", "S", "SE"][self.index()]
    }

    pub fn all() -> impl Iterator<Item = Sector> {
        (0..8).map(Sector)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("boxes have coincident centers; direction undefined")]
    CoincidentCenters,
}

/// Per-source D-LoS output: at most one neighbor per sector.
#[derive(Debug, Clone, PartialEq)]
pub struct DlosResult {
    pub source_id: usize,
    /// Indexed by sector; `(target_id, distance)`.
    pub neighbors: [Option<(usize, f64)>; SECTOR_COUNT],
}

impl DlosResult {
    fn empty(source_id: usize) -> Self {
        DlosResult {
            source_id,
            neighbors: [None; SECTOR_COUNT],
        }
    }
}

/// Shortest Euclidean distance between two axis-aligned boxes:
/// zero when they overlap or touch, otherwise the gap hypotenuse.
pub fn rect_distance(a: &BBox, b: &BBox) -> f64 {
    let gx = 0f64
        .max((a.x1 - b.x2) as f64)
        .max((b.x1 - a.x2) as f64);
    let gy = 0f64
        .max((a.y1 - b.y2) as f64)
        .max((b.y1 - a.y2) as f64);
    (gx * gx + gy * gy).sqrt()
}

/// Sector of `target` as seen from `source`, measured center to center.
/// Sector k spans [45k - 22.5, 45k + 22.5) degrees, with the angle taken in
/// math convention (image y negated so that "up the page" is positive).
pub fn direction_sector(source: &BBox, target: &BBox) -> Result<Sector, GeometryError> {
    let (sx, sy) = source.center();
    let (tx, ty) = target.center();
    let dx = tx - sx;
    let dy = -(ty - sy);
    if dx == 0.0 && dy == 0.0 {
        return Err(GeometryError::CoincidentCenters);
    }
    let mut deg = dy.atan2(dx).to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    let k = (((deg + 22.5) / 45.0).floor() as i64).rem_euclid(8) as u8;
    Ok(Sector(k))
}

/// D-LoS neighbors of `source_id`: for each sector, the node minimizing the
/// box-gap distance among nodes falling in that sector. Coincident-center
/// pairs are skipped; ties break toward the smaller node id.
pub fn dlos_neighbors(source_id: usize, doc: &Document) -> DlosResult {
    let mut result = DlosResult::empty(source_id);
    let src = &doc.segments[source_id].bbox;
    for seg in &doc.segments {
        if seg.id == source_id {
            continue;
        }
        let sector = match direction_sector(src, &seg.bbox) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let d = rect_distance(src, &seg.bbox);
        let slot = &mut result.neighbors[sector.index()];
        // Iteration is in ascending id order, so strict < keeps the
        // smaller id on ties.
        match slot {
            Some((_, best)) if d >= *best => {}
            _ => *slot = Some((seg.id, d)),
        }
    }
    result
}

/// Independent oracle for [`dlos_neighbors`]: per sector, enumerate every
/// candidate in that sector and take the argmin. Shares only
/// [`rect_distance`] and [`direction_sector`] with the production path.
pub fn dlos_brute_force(source_id: usize, doc: &Document) -> DlosResult {
    let mut result = DlosResult::empty(source_id);
    let src = &doc.segments[source_id].bbox;
    for sector in Sector::all() {
        let mut candidates: Vec<(usize, f64)> = Vec::new();
        for seg in &doc.segments {
            if seg.id == source_id {
                continue;
            }
            if direction_sector(src, &seg.bbox) == Ok(sector) {
                candidates.push((seg.id, rect_distance(src, &seg.bbox)));
            }
        }
        result.neighbors[sector.index()] = candidates
            .into_iter()
            .min_by(|(ia, da), (ib, db)| da.partial_cmp(db).unwrap().then(ia.cmp(ib)));
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::Segment;
    use proptest::prelude::*;

    fn boxes_doc(boxes: &[(i64, i64, i64, i64)]) -> Document {
        Document {
            doc_id: "t".into(),
            page_size: (1000, 1000),
            segments: boxes
                .iter()
                .enumerate()
                .map(|(i, &(x1, y1, x2, y2))| Segment {
                    id: i,
                    text: format!("s{i}"),
                    bbox: BBox::new(x1, y1, x2, y2),
                    tokens: vec![],
                    label: None,
                })
                .collect(),
            label_set: vec![],
        }
    }

    #[test]
    fn rect_distance_overlap_is_zero() {
        let a = BBox::new(0, 0, 10, 10);
        let b = BBox::new(5, 5, 20, 20);
        assert_eq!(rect_distance(&a, &b), 0.0);
    }

    #[test]
    fn rect_distance_horizontal_gap() {
        let a = BBox::new(0, 0, 10, 10);
        let b = BBox::new(40, 0, 50, 10);
        assert_eq!(rect_distance(&a, &b), 30.0);
    }

    #[test]
    fn rect_distance_diagonal_gap() {
        let a = BBox::new(0, 0, 10, 10);
        let b = BBox::new(40, 50, 60, 70);
        assert_eq!(rect_distance(&a, &b), 50.0);
    }

    #[test]
    fn direction_east() {
        let s = BBox::new(0, 0, 10, 10);
        let t = BBox::new(20, 0, 30, 10);
        assert_eq!(direction_sector(&s, &t).unwrap().index(), 0);
    }

    #[test]
    fn direction_south_is_down_the_page() {
        let s = BBox::new(0, 0, 10, 10);
        let t = BBox::new(0, 20, 10, 30);
        assert_eq!(direction_sector(&s, &t).unwrap().index(), 6);
    }

    #[test]
    fn direction_boundary_45_deg_goes_to_ne() {
        // centers (5,5) -> (15,-5): exactly 45 degrees up-right.
        let s = BBox::new(0, 0, 10, 10);
        let t = BBox::new(10, -10, 20, 0);
        assert_eq!(direction_sector(&s, &t).unwrap().index(), 1);
    }

    #[test]
    fn direction_coincident_centers() {
        let s = BBox::new(0, 0, 10, 10);
        let t = BBox::new(2, 2, 8, 8);
        assert_eq!(direction_sector(&s, &t), Err(GeometryError::CoincidentCenters));
    }

    #[test]
    fn dlos_row_of_three() {
        let doc = boxes_doc(&[(0, 0, 10, 10), (40, 0, 50, 10), (80, 0, 90, 10)]);
        let r = dlos_neighbors(1, &doc);
        assert_eq!(r.neighbors[0], Some((2, 30.0))); // East
        assert_eq!(r.neighbors[4], Some((0, 30.0))); // West
        for s in [1, 2, 3, 5, 6, 7] {
            assert_eq!(r.neighbors[s], None);
        }
        // A sees B in the East, not C (B is nearer).
        let ra = dlos_neighbors(0, &doc);
        assert_eq!(ra.neighbors[0], Some((1, 30.0)));
    }

    #[test]
    fn dlos_single_node_all_empty() {
        let doc = boxes_doc(&[(0, 0, 10, 10)]);
        let r = dlos_neighbors(0, &doc);
        assert!(r.neighbors.iter().all(|n| n.is_none()));
    }

    #[test]
    fn dlos_stacked_pair_symmetry() {
        let doc = boxes_doc(&[(0, 0, 10, 10), (0, 40, 10, 50)]);
        let ra = dlos_neighbors(0, &doc);
        let rb = dlos_neighbors(1, &doc);
        assert_eq!(ra.neighbors[6], Some((1, 30.0))); // A sees B to the South
        assert_eq!(rb.neighbors[2], Some((0, 30.0))); // B sees A to the North
    }

    #[test]
    fn brute_force_matches_on_hand_cases() {
        let doc = boxes_doc(&[(0, 0, 10, 10), (40, 0, 50, 10), (80, 0, 90, 10)]);
        for id in 0..3 {
            assert_eq!(dlos_neighbors(id, &doc), dlos_brute_force(id, &doc));
        }
    }

    fn arb_box() -> impl Strategy<Value = (i64, i64, i64, i64)> {
        (0i64..950, 0i64..950, 1i64..50, 1i64..50)
            .prop_map(|(x, y, w, h)| (x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn rect_distance_symmetric(a in arb_box(), b in arb_box()) {
            let (ba, bb) = (BBox::new(a.0, a.1, a.2, a.3), BBox::new(b.0, b.1, b.2, b.3));
            prop_assert_eq!(rect_distance(&ba, &bb), rect_distance(&bb, &ba));
            prop_assert_eq!(rect_distance(&ba, &ba), 0.0);
        }

        #[test]
        fn translation_invariance(a in arb_box(), b in arb_box(), dx in -100i64..100, dy in -100i64..100) {
            let (ba, bb) = (BBox::new(a.0, a.1, a.2, a.3), BBox::new(b.0, b.1, b.2, b.3));
            let ta = BBox::new(a.0 + dx, a.1 + dy, a.2 + dx, a.3 + dy);
            let tb = BBox::new(b.0 + dx, b.1 + dy, b.2 + dx, b.3 + dy);
            prop_assert_eq!(rect_distance(&ba, &bb), rect_distance(&ta, &tb));
            prop_assert_eq!(direction_sector(&ba, &bb).ok(), direction_sector(&ta, &tb).ok());
        }

        #[test]
        fn uniform_scaling(a in arb_box(), b in arb_box(), s in 2i64..5) {
            let (ba, bb) = (BBox::new(a.0, a.1, a.2, a.3), BBox::new(b.0, b.1, b.2, b.3));
            let sa = BBox::new(a.0 * s, a.1 * s, a.2 * s, a.3 * s);
            let sb = BBox::new(b.0 * s, b.1 * s, b.2 * s, b.3 * s);
            prop_assert_eq!(direction_sector(&ba, &bb).ok(), direction_sector(&sa, &sb).ok());
            let d = rect_distance(&ba, &bb) * s as f64;
            prop_assert!((rect_distance(&sa, &sb) - d).abs() < 1e-9 * d.max(1.0));
        }

        #[test]
        fn dlos_matches_brute_force(boxes in proptest::collection::vec(arb_box(), 2..30)) {
            let doc = boxes_doc(&boxes);
            for id in 0..doc.node_count() {
                prop_assert_eq!(dlos_neighbors(id, &doc), dlos_brute_force(id, &doc));
            }
        }
    }
}
