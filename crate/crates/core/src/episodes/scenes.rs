//! Procedural rectilinear rooms on a 0.5 m grid.
//!
//! Walls run along cell-center lines so each blocks exactly one row or column
//! of cells. Receptacle tops sit 5 cm inside their cells, sinks are 0.4 m
//! squares centered in a cell, and doors lie in the outer walls with the
//! handle on a cell-center line, so an agent standing at the cell center in
//! front of any fixture is at a well-defined distance from it.

use crate::world::{build_occupancy_grid, Cell, DoorSpec, MaterialProperties, Rect, Receptacle, Scene, SinkSpec, Vec2, Wall};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

pub const CELL: f64 = 0.5;
/// Inset of receptacle tops inside their cells.
pub const TOP_INSET: f64 = 0.05;
pub const SINK_SIZE: f64 = 0.4;
pub const DOOR_WIDTH: f64 = 0.9;
/// Handle distance from the hinge along the leaf.
pub const HANDLE_OFFSET: f64 = 0.75;

fn center_line(i: usize) -> f64 {
    (i as f64 + 0.5) * CELL
}

fn band_material(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> MaterialProperties {
    let mut absorption = [0.0; 4];
    let base = rng.gen_range(lo..hi);
    for (i, a) in absorption.iter_mut().enumerate() {
        *a = (base + 0.08 * i as f64 + rng.gen_range(-0.03..0.03)).clamp(0.02, 0.95);
    }
    MaterialProperties {
        absorption: absorption.to_vec(),
        transmission: vec![0.0; 4],
    }
}

/// Builds one room. Interior cells are columns/rows `1..n-1`.
pub fn generate_scene(id: &str, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = rng.gen_range(10..=16usize);
    let rows = rng.gen_range(8..=14usize);
    let (w, h) = (cols as f64 * CELL, rows as f64 * CELL);
    let mut scene = Scene::empty(id, w, h, CELL);
    scene.materials.insert("wall".into(), band_material(&mut rng, 0.15, 0.45));
    scene.materials.insert("partition".into(), {
        let mut m = band_material(&mut rng, 0.2, 0.5);
        let t = rng.gen_range(0.0..0.1);
        for (a, tr) in m.absorption.iter_mut().zip(m.transmission.iter_mut()) {
            *a = a.min(1.0 - t);
            *tr = t;
        }
        m
    });
    scene.materials.insert("door".into(), band_material(&mut rng, 0.1, 0.3));

    let (x0, x1, y0, y1) = (center_line(0), center_line(cols - 1), center_line(0), center_line(rows - 1));
    let corners = [Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)];
    for i in 0..4 {
        scene.walls.push(Wall::new(corners[i], corners[(i + 1) % 4], "wall"));
    }

    // Cells reserved by fixtures so far (interior coordinates).
    let mut taken: HashSet<Cell> = HashSet::new();

    if cols >= 12 && rng.gen_bool(0.5) {
        let c = rng.gen_range(4..cols - 4);
        let x = center_line(c);
        let gap_start = rng.gen_range(1..rows - 3);
        let closed = rng.gen_bool(0.1);
        if closed {
            scene.walls.push(Wall::new(Vec2::new(x, y0), Vec2::new(x, y1), "partition"));
        } else {
            if gap_start > 1 {
                scene.walls.push(Wall::new(Vec2::new(x, y0), Vec2::new(x, center_line(gap_start - 1)), "partition"));
            }
            if gap_start + 2 < rows - 1 {
                scene.walls.push(Wall::new(Vec2::new(x, center_line(gap_start + 2)), Vec2::new(x, y1), "partition"));
            }
        }
        for r in 0..rows {
            if closed || !(gap_start..gap_start + 2).contains(&r) {
                taken.insert((c, r));
            }
        }
    }

    let door_count = rng.gen_range(1..=2);
    let mut sides = [0usize, 1, 2, 3];
    sides.shuffle(&mut rng);
    for (k, &side) in sides.iter().take(door_count).enumerate() {
        let along_x = side % 2 == 0;
        let n = if along_x { cols } else { rows };
        // Hinge on the boundary between cells i and i+1; handle lands on the
        // center line of cell i+2.
        let i = rng.gen_range(1..n - 4);
        let hinge_t = (i + 1) as f64 * CELL;
        let (hinge, dir, inward) = match side {
            0 => (Vec2::new(hinge_t, y0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)),
            1 => (Vec2::new(x1, hinge_t), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0)),
            2 => (Vec2::new(hinge_t, y1), Vec2::new(1.0, 0.0), Vec2::new(0.0, -1.0)),
            _ => (Vec2::new(x0, hinge_t), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)),
        };
        let swing = if dir.perp().dot(inward) > 0.0 { 1.0 } else { -1.0 };
        scene.doors.push(DoorSpec {
            id: format!("door_{k}"),
            hinge,
            leaf_end: hinge + dir * DOOR_WIDTH,
            handle: hinge + dir * HANDLE_OFFSET,
            swing,
            material: "door".into(),
        });
    }

    let interior: Vec<Cell> = (1..cols - 1)
        .flat_map(|c| (1..rows - 1).map(move |r| (c, r)))
        .collect();
    let receptacle_count = rng.gen_range(2..=4);
    let mut placed = 0;
    for _ in 0..200 {
        if placed == receptacle_count {
            break;
        }
        let &(c, r) = interior.choose(&mut rng).unwrap();
        let (dc, dr) = *[(1usize, 1usize), (2, 1), (1, 2)].choose(&mut rng).unwrap();
        let cells: Vec<Cell> = (c..c + dc).flat_map(|x| (r..r + dr).map(move |y| (x, y))).collect();
        let fits = cells.iter().all(|&(x, y)| x < cols - 1 && y < rows - 1 && !taken.contains(&(x, y)));
        if !fits {
            continue;
        }
        taken.extend(cells.iter().copied());
        let top = Rect::new(
            c as f64 * CELL + TOP_INSET,
            r as f64 * CELL + TOP_INSET,
            (c + dc) as f64 * CELL - TOP_INSET,
            (r + dr) as f64 * CELL - TOP_INSET,
        );
        scene.receptacles.push(Receptacle {
            id: format!("table_{placed}"),
            top,
            height: (rng.gen_range(0.4..0.9f64) * 100.0).round() / 100.0,
        });
        placed += 1;
    }

    let sink_count = rng.gen_range(1..=2);
    let mut sinks = 0;
    for _ in 0..200 {
        if sinks == sink_count {
            break;
        }
        let &cell = interior.choose(&mut rng).unwrap();
        if taken.contains(&cell) {
            continue;
        }
        taken.insert(cell);
        let facing = FRAC_PI_2 * rng.gen_range(-1..=2) as f64;
        scene.sinks.push(SinkSpec::square(
            format!("sink_{sinks}"),
            Vec2::new(center_line(cell.0), center_line(cell.1)),
            SINK_SIZE,
            facing,
        ));
        sinks += 1;
    }
    debug_assert!(build_occupancy_grid(&scene).is_ok());
    scene
}

/// `count` rooms with ids `scene_000`, `scene_001`, ...
pub fn generate_scene_pool(seed: u64, count: usize) -> Vec<Scene> {
    (0..count)
        .map(|i| generate_scene(&format!("scene_{i:03}"), seed.wrapping_mul(0x100_0000_01B3) ^ (i as u64 + 1)))
        .collect()
}
