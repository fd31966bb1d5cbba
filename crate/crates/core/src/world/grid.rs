//! Occupancy grid rasterized from scene geometry, plus grid traversal and search.

use super::geometry::{Rect, Vec2};
use super::scene::Scene;
use super::WorldError;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

/// Integer cell coordinate `(col, row)`.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Vec2,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
    blocked: Vec<bool>,
}

/// Rasterizes the scene. A cell is blocked iff its closed square intersects a
/// wall, closed door, sink footprint or receptacle footprint.
pub fn build_occupancy_grid(scene: &Scene) -> Result<OccupancyGrid, WorldError> {
    if !(scene.bounds.area() > 0.0) {
        return Err(WorldError::DegenerateScene);
    }
    if !(scene.cell_size > 0.0) {
        return Err(WorldError::InvalidCellSize(scene.cell_size));
    }
    let mut grid = OccupancyGrid::free(scene.bounds, scene.cell_size);
    for r in scene.obstacle_footprints() {
        grid.block_rect(&r);
    }
    Ok(grid)
}

impl OccupancyGrid {
    /// All-free grid covering `bounds`.
    pub fn free(bounds: Rect, cell_size: f64) -> Self {
        let cols = (bounds.width() / cell_size).ceil().max(1.0) as usize;
        let rows = (bounds.height() / cell_size).ceil().max(1.0) as usize;
        Self {
            origin: bounds.min,
            cell_size,
            cols,
            rows,
            blocked: vec![false; cols * rows],
        }
    }

    /// Inclusive index range of cells whose closed extent meets `[lo, hi]` on one axis.
    fn axis_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let first = ((lo - origin) / self.cell_size - 1.0).ceil().max(0.0);
        let last = ((hi - origin) / self.cell_size).floor();
        if last < 0.0 || first > (n - 1) as f64 || first > last {
            return None;
        }
        Some((first as usize, (last as usize).min(n - 1)))
    }

    pub fn block_rect(&mut self, r: &Rect) {
        let (Some((c0, c1)), Some((r0, r1))) = (
            self.axis_range(r.min.x, r.max.x, self.origin.x, self.cols),
            self.axis_range(r.min.y, r.max.y, self.origin.y, self.rows),
        ) else {
            return;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                self.blocked[row * self.cols + col] = true;
            }
        }
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[cell.1 * self.cols + cell.0]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_blocked(cell)
    }

    pub fn cell_rect(&self, cell: Cell) -> Rect {
        let x0 = self.origin.x + cell.0 as f64 * self.cell_size;
        let y0 = self.origin.y + cell.1 as f64 * self.cell_size;
        Rect::new(x0, y0, x0 + self.cell_size, y0 + self.cell_size)
    }

    pub fn cell_center(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            self.origin.x + (cell.0 as f64 + 0.5) * self.cell_size,
            self.origin.y + (cell.1 as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing `p` (half-open on the upper edge, clamped at the far boundary).
    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fy = (p.y - self.origin.y) / self.cell_size;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (cx, cy) = (fx.floor() as usize, fy.floor() as usize);
        let cx = if cx == self.cols && fx == self.cols as f64 { cx - 1 } else { cx };
        let cy = if cy == self.rows && fy == self.rows as f64 { cy - 1 } else { cy };
        (cx < self.cols && cy < self.rows).then_some((cx, cy))
    }

    pub fn is_free_point(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (c, r)))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|c| self.is_free(*c))
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    pub fn neighbors4(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (c, r) = (cell.0 as isize, cell.1 as isize);
        [(c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)]
            .into_iter()
            .filter(|(x, y)| *x >= 0 && *y >= 0 && (*x as usize) < self.cols && (*y as usize) < self.rows)
            .map(|(x, y)| (x as usize, y as usize))
    }

    /// Walks the cells pierced by the ray `start + t*dir`, `t in [0, max_t]`,
    /// calling `visit(cell, t_enter)` in order until it returns `false` or the ray
    /// leaves the grid. Returns the entry parameter of the cell that stopped it.
    pub fn traverse<F>(&self, start: Vec2, dir: Vec2, max_t: f64, mut visit: F) -> Option<f64>
    where
        F: FnMut(Cell, f64) -> bool,
    {
        let mut cell = self.cell_of(start)?;
        let cs = self.cell_size;
        let step_x: isize = if dir.x > 0.0 { 1 } else if dir.x < 0.0 { -1 } else { 0 };
        let step_y: isize = if dir.y > 0.0 { 1 } else if dir.y < 0.0 { -1 } else { 0 };
        let boundary = |idx: usize, step: isize, origin: f64| {
            origin + (idx as f64 + if step > 0 { 1.0 } else { 0.0 }) * cs
        };
        let mut t_max_x = if step_x != 0 {
            (boundary(cell.0, step_x, self.origin.x) - start.x) / dir.x
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if step_y != 0 {
            (boundary(cell.1, step_y, self.origin.y) - start.y) / dir.y
        } else {
            f64::INFINITY
        };
        let t_delta_x = if step_x != 0 { cs / dir.x.abs() } else { f64::INFINITY };
        let t_delta_y = if step_y != 0 { cs / dir.y.abs() } else { f64::INFINITY };
        let mut t = 0.0;
        loop {
            if !visit(cell, t) {
                return Some(t);
            }
            if t_max_x < t_max_y {
                t = t_max_x;
                t_max_x += t_delta_x;
                let nx = cell.0 as isize + step_x;
                if nx < 0 || nx as usize >= self.cols {
                    return None;
                }
                cell.0 = nx as usize;
            } else {
                t = t_max_y;
                t_max_y += t_delta_y;
                let ny = cell.1 as isize + step_y;
                if ny < 0 || ny as usize >= self.rows {
                    return None;
                }
                cell.1 = ny as usize;
            }
            if t > max_t {
                return None;
            }
        }
    }

    /// True if the segment `a..b` stays inside the grid and only touches free cells.
    pub fn segment_is_free(&self, a: Vec2, b: Vec2) -> bool {
        if self.cell_of(b).is_none() {
            return false;
        }
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            return self.is_free_point(a);
        }
        let dir = d * (1.0 / len);
        let mut clear = true;
        let stopped = self.traverse(a, dir, len, |cell, _| {
            if self.is_blocked(cell) {
                clear = false;
                false
            } else {
                true
            }
        });
        self.cell_of(a).is_some() && clear && stopped.is_none()
    }

    /// 4-connected A* from `start` to the nearest cell satisfying `is_goal`.
    /// `goal_hint = (target, radius)` promises every goal cell center lies within
    /// `radius` of `target` and enables the distance heuristic.
    /// Returns the cell path including both endpoints.
    pub fn astar<G>(&self, start: Cell, is_goal: G, goal_hint: Option<(Vec2, f64)>) -> Option<Vec<Cell>>
    where
        G: Fn(Cell) -> bool,
    {
        if self.is_blocked(start) {
            return None;
        }
        let idx = |c: Cell| c.1 * self.cols + c.0;
        let h = |c: Cell| -> u64 {
            match goal_hint {
                Some((t, radius)) => {
                    let p = self.cell_center(c);
                    let manhattan = (p.x - t.x).abs() + (p.y - t.y).abs();
                    ((manhattan - radius * std::f64::consts::SQRT_2) / self.cell_size)
                        .max(0.0)
                        .floor() as u64
                }
                None => 0,
            }
        };
        let mut g = vec![u64::MAX; self.cols * self.rows];
        let mut parent: Vec<Option<Cell>> = vec![None; self.cols * self.rows];
        let mut open = BinaryHeap::new();
        g[idx(start)] = 0;
        open.push(Reverse((h(start), 0u64, start.1, start.0)));
        while let Some(Reverse((_, cost, row, col))) = open.pop() {
            let cell = (col, row);
            if cost > g[idx(cell)] {
                continue;
            }
            if is_goal(cell) {
                let mut path = vec![cell];
                let mut cur = cell;
                while let Some(p) = parent[idx(cur)] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbors4(cell) {
                if self.is_blocked(n) {
                    continue;
                }
                let nc = cost + 1;
                if nc < g[idx(n)] {
                    g[idx(n)] = nc;
                    parent[idx(n)] = Some(cell);
                    open.push(Reverse((nc + h(n), nc, n.1, n.0)));
                }
            }
        }
        None
    }

    /// Cells 4-connected to `start` through free cells.
    pub fn flood_fill(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.cols * self.rows];
        if self.is_blocked(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[start.1 * self.cols + start.0] = true;
        while let Some(c) = queue.pop_front() {
            for n in self.neighbors4(c) {
                let i = n.1 * self.cols + n.0;
                if !seen[i] && self.is_free(n) {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }
}
