//! Philox4x32-10 counter-based generator.

use rand_core::{impls, RngCore};

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Ten Philox rounds on `ctr` under `key`.
#[inline]
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Stream of 128-bit blocks at counters `(a, b, c, 0), (a, b, c, 1), ...`.
///
/// Each space-time cell owns one such stream, so its draws do not depend on
/// the order in which cells are generated.
#[derive(Debug, Clone)]
pub struct CellStream {
    key: [u32; 2],
    ctr: [u32; 4],
    buf: [u32; 4],
    used: usize,
}

impl CellStream {
    pub fn new(seed: u64, a: u32, b: u32, c: u32) -> Self {
        CellStream {
            key: [seed as u32, (seed >> 32) as u32],
            ctr: [a, b, c, 0],
            buf: [0; 4],
            used: 4,
        }
    }

    #[inline]
    fn refill(&mut self) {
        self.buf = philox4x32(self.ctr, self.key);
        self.ctr[3] = self.ctr[3].wrapping_add(1);
        self.used = 0;
    }
}

impl RngCore for CellStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        if self.used >= 4 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        if self.used > 2 {
            self.refill();
        }
        let lo = u64::from(self.buf[self.used]);
        let hi = u64::from(self.buf[self.used + 1]);
        self.used += 2;
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
