//! Fixtures shared by the integration suites: the three reference frames,
//! generated orbit frames, a brute-force automorphism oracle, and seeded
//! random measures.

// Each test binary uses its own subset of these fixtures.
#![allow(dead_code)]

use modalx_core::frame::{parse_frame, Frame};
use modalx_core::measure::ExactMeasure;
use modalx_core::perm::Permutation;

pub const EXAMPLE2: &str = "\
frame example2
world w0
world a1
world a2
world a3
world b1
world b2
designated w0
edge w0 *
biedge a1 a2
biedge a1 a3
biedge a2 a3
close reflexive
end
";

pub const CHAIN5: &str = "\
frame chain
world t0
world t1
world t2
world t3
world t4
designated t0
edge t0 t1
edge t1 t2
edge t2 t3
edge t3 t4
close reflexive
close transitive
end
";

pub const TWO_PAIR: &str = "\
frame twopair
world w0
world p1
world p2
world q1
world q2
designated w0
edge w0 *
biedge p1 p2
biedge q1 q2
close reflexive
end
";

/// Designated world plus `extra` mutually accessible worlds.
pub fn universal(extra: usize) -> Frame {
    let mut s = String::from("frame u\nworld w0\n");
    for i in 1..=extra {
        s.push_str(&format!("world v{i}\n"));
    }
    s.push_str("designated w0\nedge * *\nend\n");
    parse_frame(&s).unwrap()
}

/// Designated world seeing every world, plus one universal block per entry
/// of `sizes`, mutually inaccessible across blocks. Block b's worlds come
/// out consecutively as o<b>_<i>, so the stabilizer's cluster orbits are
/// exactly the blocks, in order.
pub fn orbit_frame(sizes: &[usize]) -> Frame {
    let mut s = String::from("frame blocks\nworld w0\n");
    for (b, &size) in sizes.iter().enumerate() {
        for i in 1..=size {
            s.push_str(&format!("world o{b}_{i}\n"));
        }
    }
    s.push_str("designated w0\nedge w0 *\n");
    for (b, &size) in sizes.iter().enumerate() {
        for i in 1..=size {
            for j in (i + 1)..=size {
                s.push_str(&format!("biedge o{b}_{i} o{b}_{j}\n"));
            }
        }
    }
    s.push_str("close reflexive\nend\n");
    parse_frame(&s).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for slot in 0..n {
            let mut images = rest.clone();
            images.insert(slot, n - 1);
            out.push(images);
        }
    }
    out
}

/// Every bijection of the worlds that preserves the relation, optionally
/// restricted to those fixing the designated world. Exponential; for
/// oracle use on frames of at most ~8 worlds.
pub fn brute_force_automorphisms(frame: &Frame, fix_designated: bool) -> Vec<Permutation> {
    let n = frame.world_count();
    let mut out = Vec::new();
    'next: for images in permutations(n) {
        if fix_designated && images[frame.designated()] != frame.designated() {
            continue;
        }
        for u in 0..n {
            for v in 0..n {
                if frame.related(u, v) != frame.related(images[u], images[v]) {
                    continue 'next;
                }
            }
        }
        out.push(Permutation::from_images(images).unwrap());
    }
    out
}

/// Seeded random point in the probability simplex over the valuation space.
pub fn random_measure(world_count: usize, atom_count: usize, seed: u64) -> ExactMeasure {
    let size = 1usize << (world_count * atom_count);
    let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut p: Vec<f64> = (0..size).map(|_| next() + 1e-3).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    // Exact renormalization so the 1e-12 constructor check cannot trip.
    let total: f64 = p.iter().sum();
    p[0] += 1.0 - total;
    ExactMeasure::new(world_count, atom_count, p).unwrap()
}
