use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::score::{FrameSpan, TemporalInterval};
use crate::error::{Error, Result};

/// UCF-Crime anomaly classes, used when no category list is supplied.
pub const DEFAULT_CATEGORIES: [&str; 13] = [
    "Abuse",
    "Arrest",
    "Arson",
    "Assault",
    "Burglary",
    "Explosion",
    "Fighting",
    "RoadAccidents",
    "Robbery",
    "Shooting",
    "Shoplifting",
    "Stealing",
    "Vandalism",
];

pub fn default_categories() -> Vec<String> {
    DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampFormat {
    /// `frame 12`
    #[default]
    Frames,
    /// `mm:ss`, whole seconds rounded down.
    Seconds,
}

impl FromStr for TimestampFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frames" => Ok(Self::Frames),
            "seconds" => Ok(Self::Seconds),
            other => Err(Error::invalid(format!(
                "unknown timestamp format {other:?} (frames|seconds)"
            ))),
        }
    }
}

impl fmt::Display for TimestampFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Frames => "frames",
            Self::Seconds => "seconds",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TetPrompt {
    pub text: String,
    pub category_list: Vec<String>,
    pub timestamp_format: TimestampFormat,
}

pub fn format_timestamp(frame: usize, fps: f64, format: TimestampFormat) -> Result<String> {
    match format {
        TimestampFormat::Frames => Ok(format!("frame {frame}")),
        TimestampFormat::Seconds => {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(Error::invalid(format!(
                    "fps must be positive for seconds timestamps, got {fps}"
                )));
            }
            let secs = (frame as f64 / fps).floor() as u64;
            Ok(format!("{:02}:{:02}", secs / 60, secs % 60))
        }
    }
}

/// Renders the temporal prompt for a detected interval.
///
/// Absent intervals are an error: a video with no qualifying frame gets no prompt.
pub fn render_tet(
    interval: &TemporalInterval,
    fps: f64,
    categories: &[String],
    format: TimestampFormat,
) -> Result<TetPrompt> {
    let span = interval
        .span
        .ok_or_else(|| Error::invalid("no anomalous interval to describe"))?;
    render_span(span, fps, categories, format)
}

pub fn render_span(
    span: FrameSpan,
    fps: f64,
    categories: &[String],
    format: TimestampFormat,
) -> Result<TetPrompt> {
    if categories.is_empty() {
        return Err(Error::invalid("category list is empty"));
    }
    let quoted: Vec<String> = categories.iter().map(|c| format!("'{c}'")).collect();
    let text = format!(
        "Known common crime types are: {}. There is one of the crime types occurring from {} to {}.",
        quoted.join(","),
        format_timestamp(span.start, fps, format)?,
        format_timestamp(span.end, fps, format)?,
    );
    Ok(TetPrompt {
        text,
        category_list: categories.to_vec(),
        timestamp_format: format,
    })
}
