//! Fixture loading shared by the benchmark targets.

pub const GRAMMAR_V1: &str =
    include_str!("../../coevolve-core/fixtures/domainmodel/grammar_v1.xtext");
pub const GRAMMAR_V2: &str =
    include_str!("../../coevolve-core/fixtures/domainmodel/grammar_v2.xtext");
pub const INSTANCE_V1: &str =
    include_str!("../../coevolve-core/fixtures/domainmodel/instance_v1.dmodel");

/// The tutorial instance tiled `n` times, for scaling measurements. Each tile
/// renames its identifiers so the result still conforms.
pub fn scaled_instance(n: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        out.push_str(&INSTANCE_V1.replace("String", &format!("String{i}")));
        out.push('\n');
    }
    out
}
