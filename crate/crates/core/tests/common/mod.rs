//! Shared helpers for the fixture-driven tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;

use uavnoma::channel::ChannelParams;
use uavnoma::noma::UserRates;

pub const RTOL: f64 = 1e-12;

pub fn rows(name: &str) -> Vec<HashMap<String, f64>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let out: Vec<_> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            headers
                .iter()
                .zip(r.iter())
                .map(|(h, v)| {
                    let x = match v {
                        "mmwave" | "los" => 0.0,
                        "sub6" | "nlos" => 1.0,
                        _ => v.parse().unwrap(),
                    };
                    (h.to_string(), x)
                })
                .collect()
        })
        .collect();
    assert!(!out.is_empty(), "{name} is empty");
    out
}

pub fn close(got: f64, want: f64, what: &str) {
    let err = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
    assert!(err <= RTOL, "{what}: got {got:e}, want {want:e}, rel err {err:e}");
}

pub fn params(code: f64) -> ChannelParams {
    if code == 0.0 {
        ChannelParams::mmwave()
    } else {
        ChannelParams::sub6()
    }
}

pub fn rates(r: &HashMap<String, f64>, n: usize) -> UserRates {
    UserRates::new((1..=n).map(|i| r[&format!("r{i}")]).collect()).unwrap()
}
