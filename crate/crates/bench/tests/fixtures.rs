use triharm::{GridSpec, LpFamily};
use triharm_bench::{band_inputs, surrogates};

#[test]
fn fixtures_are_reproducible_and_in_band() {
    let spec = GridSpec::new(1, 512, 64.0).unwrap();
    let a = surrogates(spec, 3, 7).unwrap();
    let b = surrogates(spec, 3, 7).unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.values(), y.values());
    }
    let fam = LpFamily::build(spec).unwrap();
    for f in band_inputs(spec, 3, 1).unwrap() {
        fam.check_band(&f, 1e-12).unwrap();
    }
}
