use demix_core::experiments::doa::*;

fn summarize(reports: &[DoaReport]) -> (f64, f64, f64, f64) {
    let raw: Vec<f64> = reports.iter().flat_map(|r| r.raw_errors.iter().map(|e| e.2)).collect();
    let dem: Vec<f64> = reports.iter().flat_map(|r| r.demixed_errors.iter().map(|e| e.2)).collect();
    let frac = |v: &[f64]| v.iter().filter(|&&e| e > 3.0).count() as f64 / v.len() as f64;
    (median(&raw), median(&dem), frac(&raw), frac(&fd_vec(dem)))
}
fn fd_vec(v: Vec<f64>) -> Vec<f64> { v }

fn main() {
    for spread in [16.0, 32.0, 64.0, 128.0] {
        for snr in [5.0, -5.0] {
            for lambda in [2.0, 5.0] {
                let sc = DoaScenario {
                    sensors: 10,
                    sources: 2,
                    bearings_deg: vec![-10.0, 15.0],
                    snapshots: 200,
                    snr_db: snr,
                    noise_spread: spread,
                    seed: 7,
                };
                let reports = doa_study(&sc, 50, lambda).unwrap();
                let (mr, md, fr, fd) = summarize(&reports);
                println!(
                    "spread={spread:>5} snr={snr:>4} lambda={lambda:>4}: median raw={mr:.3} dem={md:.3} | frac>3 raw={fr:.2} dem={fd:.2}"
                );
            }
        }
    }
}
