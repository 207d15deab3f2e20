use dualq_core::aqm::AqmConfig;
use dualq_core::scenario::{format_duration, format_rate, ParamSet, Preset, PresetName};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    pub name: PresetName,
    pub rate: String,
    pub rtt: String,
    pub bdp_bytes: u64,
    pub default: AqmConfig,
    pub refined: AqmConfig,
}

pub fn presets() -> Vec<PresetInfo> {
    PresetName::ALL
        .into_iter()
        .map(|name| {
            let p = Preset::get(name);
            PresetInfo {
                name,
                rate: format_rate(p.rate_bps),
                rtt: format_duration(p.rtt),
                bdp_bytes: p.bdp_bytes(),
                default: p.aqm(ParamSet::Default),
                refined: p.aqm(ParamSet::Refined),
            }
        })
        .collect()
}

pub fn render_table(presets: &[PresetInfo]) -> String {
    let mut out = format!(
        "{:<8} {:>9} {:>6} {:>10} {:>11}  {:<22} {}\n",
        "preset",
        "rate",
        "rtt",
        "bdp_bytes",
        "limit_bytes",
        "default (step/target)",
        "refined (step/target)"
    );
    for p in presets {
        let pair = |c: &AqmConfig| {
            format!(
                "{} / {}",
                format_duration(c.step_thresh),
                format_duration(c.target)
            )
        };
        out.push_str(&format!(
            "{:<8} {:>9} {:>6} {:>10} {:>11}  {:<22} {}\n",
            p.name.as_str(),
            p.rate,
            p.rtt,
            p.bdp_bytes,
            p.default.limit_bytes,
            pair(&p.default),
            pair(&p.refined)
        ));
    }
    out
}
