/// Cosine similarity. A zero-norm input yields `value == 0.0` with
/// `degenerate` set, so batch protocols stay total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub degenerate: bool,
}

pub fn cosine(u: &[f64], v: &[f64]) -> Cosine {
    assert_eq!(u.len(), v.len(), "cosine: vectors differ in length");
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Cosine {
            value: 0.0,
            degenerate: true,
        };
    }
    Cosine {
        value: (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    }
}
