//! Config files: nested JSON, unknown keys rejected.

use std::fs;
use std::path::Path;

use ordinalflow::PipelineConfig;

use crate::error::{CliResult, Failure};

pub fn parse_config(text: &str) -> CliResult<PipelineConfig> {
    let config: PipelineConfig = serde_json::from_str(text).map_err(Failure::config)?;
    config.validate().map_err(Failure::config)?;
    Ok(config)
}

/// Defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(anyhow::anyhow!("reading config {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::code;

    #[test]
    fn empty_object_is_defaults() {
        assert_eq!(parse_config("{}").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn unknown_and_out_of_range_keys_fail() {
        assert_eq!(parse_config(r#"{"fusoin":{}}"#).unwrap_err().code, code::CONFIG);
        assert_eq!(
            parse_config(r#"{"bgsub":{"learning_rate":2.0}}"#).unwrap_err().code,
            code::CONFIG
        );
        assert_eq!(parse_config("not json").unwrap_err().code, code::CONFIG);
    }

    #[test]
    fn partial_override() {
        let c = parse_config(r#"{"fusion":{"aggregator":"median"},"pipeline":{"segment_len":50}}"#)
            .unwrap();
        assert_eq!(c.pipeline.segment_len, 50);
        assert_eq!(c.fusion.aggregator, ordinalflow::fusion::Aggregator::Median);
        assert_eq!(c.bgsub, Default::default());
    }
}
