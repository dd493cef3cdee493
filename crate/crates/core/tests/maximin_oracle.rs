//! Boundary paths against a threshold-sweep oracle.

mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles::{maximin_oracle, N};
use xclick_core::contour::maximin_path;
use xclick_core::edge::EdgeMap;
use xclick_core::geometry::{BoundingBox, Point};

#[test]
fn random_six_by_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let region = BoundingBox::full(N as u32, N as u32);
    for _ in 0..100 {
        // Coarse levels give plenty of ties.
        let e = EdgeMap::from_fn(N as u32, N as u32, |_, _| rng.random_range(0..8) as f64 / 7.0).unwrap();
        let p = Point::new(rng.random_range(0..N as u32), rng.random_range(0..N as u32));
        let q = Point::new(rng.random_range(0..N as u32), rng.random_range(0..N as u32));
        let path = maximin_path(&e, p, q, region).unwrap();
        let (b, len) = maximin_oracle(&e, p, q);
        assert_eq!(path.bottleneck, b);
        assert_eq!(path.len(), len);
        assert!(path.is_connected());
        assert_eq!(path.pixels.first(), Some(&p));
        assert_eq!(path.pixels.last(), Some(&q));
        let weakest = path.pixels.iter().map(|&pt| e.at(pt)).fold(f64::INFINITY, f64::min);
        assert_eq!(weakest, b);
        // Deterministic.
        assert_eq!(maximin_path(&e, p, q, region).unwrap(), path);
    }
}
