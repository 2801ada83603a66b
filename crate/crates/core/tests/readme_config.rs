use lyriccanvas::config::{EndpointConfig, PipelineConfig};

#[test]
fn readme_example_config_loads_with_defaults() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + "```toml\n".len();
    let body = &readme[start..start + readme[start..].find("```").unwrap()];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pipeline.toml");
    std::fs::write(&path, body).unwrap();
    let cfg = PipelineConfig::load(&path, &[]).unwrap();
    assert_eq!(cfg.endpoint, EndpointConfig::default());
    assert_eq!(cfg.paths.raw, dir.path().join("data/raw.jsonl"));
    assert_eq!(cfg.context_sizes, [0, 1, 3, 5, 7]);
}
