//! Static raster frames in binary PPM (P6).

use super::world::World;

/// Pixels per grid cell along each axis.
pub const CELL_PIXELS: usize = 4;

const BACKGROUND: [u8; 3] = [240, 240, 240];
const FOOD: [u8; 3] = [40, 170, 60];
const TEAM_COLORS: [[u8; 3]; 2] = [[220, 40, 40], [40, 70, 220]];

/// Renders the world as a P6 image: one `CELL_PIXELS` square per cell, team
/// colored footprints dimmed in proportion to lost health, food in green.
pub fn render_frame(world: &World) -> Vec<u8> {
    let spec = world.spec();
    let (cw, ch) = (spec.map_width as usize, spec.map_height as usize);
    let mut cells = vec![BACKGROUND; cw * ch];
    for (x, y) in world.food_cells() {
        cells[y as usize * cw + x as usize] = FOOD;
    }
    for a in world.agents().iter().filter(|a| a.alive) {
        let class = world.class(a.team);
        let shade = 0.35 + 0.65 * f64::from(a.hp) / f64::from(class.max_hp);
        let color = TEAM_COLORS[usize::from(a.team)].map(|c| (f64::from(c) * shade).round() as u8);
        let side = class.footprint_side as usize;
        for dy in 0..side {
            for dx in 0..side {
                cells[(a.y as usize + dy) * cw + a.x as usize + dx] = color;
            }
        }
    }

    let (pw, ph) = (cw * CELL_PIXELS, ch * CELL_PIXELS);
    let mut out = format!("P6\n{pw} {ph}\n255\n").into_bytes();
    out.reserve(pw * ph * 3);
    for py in 0..ph {
        for px in 0..pw {
            out.extend_from_slice(&cells[(py / CELL_PIXELS) * cw + px / CELL_PIXELS]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::scenario::{ClassKind, ScenarioKind, ScenarioSpec};

    fn small() -> World {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 1), (ClassKind::Battle, 1)]);
        spec.map_width = 8;
        spec.map_height = 8;
        World::build(&spec).unwrap()
    }

    fn pixel(img: &[u8], header: usize, width: usize, x: usize, y: usize) -> [u8; 3] {
        let i = header + (y * width + x) * 3;
        [img[i], img[i + 1], img[i + 2]]
    }

    #[test]
    fn empty_world_is_uniform_background() {
        let mut w = small();
        w.arrange(&[(0, 0, 0), (4, 4, 0)]).unwrap();
        let img = render_frame(&w);
        let header = b"P6\n32 32\n255\n".len();
        assert!(img.starts_with(b"P6\n32 32\n255\n"));
        assert_eq!(img.len(), header + 32 * 32 * 3);
        assert!(img[header..].chunks(3).all(|p| p == BACKGROUND));
    }

    #[test]
    fn agent_at_origin_is_a_two_cell_block() {
        let mut w = small();
        w.arrange(&[(0, 0, 10), (6, 6, 0)]).unwrap();
        let img = render_frame(&w);
        let header = b"P6\n32 32\n255\n".len();
        let px = 2 * CELL_PIXELS;
        assert_eq!(pixel(&img, header, 32, 0, 0), TEAM_COLORS[0]);
        assert_eq!(pixel(&img, header, 32, px - 1, px - 1), TEAM_COLORS[0]);
        assert_eq!(pixel(&img, header, 32, px, 0), BACKGROUND);
        assert_eq!(pixel(&img, header, 32, 0, px), BACKGROUND);
    }

    #[test]
    fn identical_worlds_render_identically() {
        assert_eq!(render_frame(&small()), render_frame(&small()));
    }
}
