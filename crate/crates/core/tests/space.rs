//! Allocation during a private query does not grow with the universe.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use dpq_core::{
    dp_quantile_gk, AugmentedSummary, Element, ExponentDivisor, GkSummary, MechanismConfig, RandomSource,
    Universe,
};

struct Counting;

static BYTES: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        BYTES.fetch_add(layout.size(), Ordering::Relaxed);
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn query_bytes(card: u64) -> usize {
    let universe = Universe::new(0.0, 1.0, card).unwrap();
    let mut s = GkSummary::new(0.01).unwrap();
    let mut gen = RandomSource::new(3);
    s.stream_insert((0..20_000).map(|_| Element(gen.below(card))));
    s.compress();
    let aug = AugmentedSummary::new(&s);
    let cfg = MechanismConfig::for_summary(&s, 1.0, 0.5, ExponentDivisor::TwiceSensitivity).unwrap();
    let mut rng = RandomSource::new(4);
    let before = BYTES.load(Ordering::Relaxed);
    for _ in 0..10 {
        dp_quantile_gk(&aug, &universe, &cfg, &mut rng).unwrap();
    }
    BYTES.load(Ordering::Relaxed) - before
}

// one test in this binary, so no other thread allocates while counting
#[test]
fn query_allocation_is_independent_of_universe_size() {
    let small = query_bytes(1 << 16);
    let huge = query_bytes(1 << 62);
    assert!(small <= 1024 && huge <= 1024, "small {small} B, huge {huge} B");
}
