//! Seeded value noise, evaluated at continuous coordinates so shifted
//! renderings are exact.

fn hash(ix: i64, iy: i64, seed: u64) -> f32 {
    // splitmix64 over the packed lattice coordinates
    let mut z = seed
        .wrapping_add((ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 40) as f32 / (1u64 << 24) as f32
}

fn smoothstep(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

fn octave(x: f32, y: f32, seed: u64, cell: f32) -> f32 {
    let gx = x / cell;
    let gy = y / cell;
    let x0 = gx.floor();
    let y0 = gy.floor();
    let tx = smoothstep(gx - x0);
    let ty = smoothstep(gy - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let v00 = hash(ix, iy, seed);
    let v10 = hash(ix + 1, iy, seed);
    let v01 = hash(ix, iy + 1, seed);
    let v11 = hash(ix + 1, iy + 1, seed);
    let top = v00 + (v10 - v00) * tx;
    let bottom = v01 + (v11 - v01) * tx;
    top + (bottom - top) * ty
}

/// Two-octave value noise in `[0, 1]` with base lattice spacing `cell`.
pub fn value_noise(x: f32, y: f32, seed: u64, cell: f32) -> f32 {
    let a = octave(x, y, seed, cell);
    let b = octave(x, y, seed ^ 0x5DEE_CE66_D1CE_4E5B, cell * 0.5);
    0.65 * a + 0.35 * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stays_in_unit_range_and_is_deterministic() {
        for i in 0..500 {
            let x = i as f32 * 0.37 - 40.0;
            let y = i as f32 * 0.11;
            let v = value_noise(x, y, 3, 6.0);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, value_noise(x, y, 3, 6.0));
        }
    }

    #[test]
    fn seeds_differ() {
        let same = (0..50)
            .filter(|&i| value_noise(i as f32 * 1.3, 2.0, 1, 5.0) == value_noise(i as f32 * 1.3, 2.0, 2, 5.0))
            .count();
        assert!(same < 5);
    }
}
