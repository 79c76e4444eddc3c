//! Flat key-value reports and CSV rows for fit results.

use std::fmt::Write as _;

use super::{FitResult, NScanRow, ScalingFit};

pub const FIT_CSV_HEADER: &str = "label,parameter,value,sigma,rss,iterations,converged,points";
pub const SCALING_CSV_HEADER: &str = "label,slope,slope_sigma,offset,offset_sigma,alpha,alpha_sigma,rss,points";
pub const N_SCAN_CSV_HEADER: &str = "n_eff,g_n_mhz,hwhm_khz,buildup_rate_khz,g_n_fit_mhz,g_n_fit_sigma_mhz";

fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

impl FitResult {
    /// `key = value` lines; estimates appear as `<name>` and `<name>_sigma`.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        for e in &self.estimates {
            let _ = writeln!(out, "{} = {}", e.name, sci(e.value));
            let _ = writeln!(out, "{}_sigma = {}", e.name, sci(e.sigma));
        }
        let _ = writeln!(out, "rss = {}", sci(self.rss));
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "converged = {}", self.converged);
        let _ = writeln!(out, "points = {}", self.points);
        out
    }

    /// One CSV row per estimate, without header.
    pub fn to_csv_rows(&self, label: &str) -> String {
        let mut out = String::new();
        for e in &self.estimates {
            let _ = writeln!(
                out,
                "{label},{},{},{},{},{},{},{}",
                e.name,
                sci(e.value),
                sci(e.sigma),
                sci(self.rss),
                self.iterations,
                self.converged,
                self.points
            );
        }
        out
    }
}

impl ScalingFit {
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "slope = {}", sci(self.slope));
        let _ = writeln!(out, "slope_sigma = {}", sci(self.slope_sigma));
        let _ = writeln!(out, "slope_per_2pi_mhz = {}", sci(self.slope_per_mhz()));
        let _ = writeln!(out, "offset = {}", sci(self.offset));
        let _ = writeln!(out, "offset_sigma = {}", sci(self.offset_sigma));
        let _ = writeln!(out, "offset_khz = {}", sci(crate::units::to_khz(self.offset)));
        let _ = writeln!(out, "alpha = {}", sci(self.alpha));
        let _ = writeln!(out, "alpha_sigma = {}", sci(self.alpha_sigma));
        let _ = writeln!(out, "rss = {}", sci(self.rss));
        let _ = writeln!(out, "points = {}", self.points);
        out
    }

    pub fn to_csv_row(&self, label: &str) -> String {
        format!(
            "{label},{},{},{},{},{},{},{},{}\n",
            sci(self.slope),
            sci(self.slope_sigma),
            sci(self.offset),
            sci(self.offset_sigma),
            sci(self.alpha),
            sci(self.alpha_sigma),
            sci(self.rss),
            self.points
        )
    }
}

impl NScanRow {
    pub fn to_csv_row(&self) -> String {
        use crate::units::{to_khz, to_mhz};
        format!(
            "{},{},{},{},{},{}\n",
            sci(self.n_eff),
            sci(to_mhz(self.g_n)),
            sci(to_khz(self.hwhm)),
            sci(to_khz(self.buildup_rate)),
            sci(to_mhz(self.g_n_fit)),
            sci(to_mhz(self.g_n_fit_sigma))
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::Estimate;
    use super::*;

    #[test]
    fn report_lists_every_estimate() {
        let fit = FitResult {
            estimates: vec![Estimate { name: "hwhm".into(), value: 1.5, sigma: 0.25 }],
            rss: 0.0,
            iterations: 3,
            converged: true,
            points: 10,
        };
        let text = fit.to_report();
        assert!(text.contains("hwhm = 1.50000000000e0\n"));
        assert!(text.contains("hwhm_sigma = 2.50000000000e-1\n"));
        assert!(text.contains("converged = true\n"));
        assert_eq!(fit.to_csv_rows("a"), "a,hwhm,1.50000000000e0,2.50000000000e-1,0.00000000000e0,3,true,10\n");
        assert_eq!(FIT_CSV_HEADER.split(',').count(), fit.to_csv_rows("a").trim().split(',').count());
    }
}
