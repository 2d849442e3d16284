//! Measured YouTube AV1 delivery settings per resolution: median bitrate,
//! the player's buffer length and the resulting buffer size.
//!
//! Shipped as reference data only; nothing in the simulator reads it. The
//! buffer sizes level off near 100 MB, which is where the 24 s buffer and the
//! 2 s chunk defaults come from.
//!
//! The 2880p row is kept as measured even though its bitrate sits below
//! 2160p's. 5K delivery was experimental at measurement time, so the
//! experiment ladder uses an interpolated 28,000 kbps for that rung instead.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoutubeSetting {
    pub resolution: u32,
    pub median_bitrate_kbps: f64,
    pub buffer_length_s: f64,
    pub buffer_size_mb: f64,
}

const fn row(resolution: u32, median_bitrate_kbps: f64, buffer_length_s: f64, buffer_size_mb: f64) -> YoutubeSetting {
    YoutubeSetting {
        resolution,
        median_bitrate_kbps,
        buffer_length_s,
        buffer_size_mb,
    }
}

pub const YOUTUBE_AV1: [YoutubeSetting; 10] = [
    row(144, 83.0, 120.0, 1.3),
    row(240, 181.0, 120.0, 2.7),
    row(360, 397.0, 120.0, 6.1),
    row(480, 725.0, 120.0, 10.6),
    row(720, 1861.0, 120.0, 28.8),
    row(1080, 3372.0, 120.0, 51.3),
    row(1440, 8706.0, 57.5, 94.2),
    row(2160, 17941.0, 30.6, 97.5),
    row(2880, 13873.0, 56.7, 103.9),
    row(4320, 37087.0, 23.8, 101.6),
];

/// Resolutions whose median bitrate is lower than the row before.
pub fn bitrate_inversions() -> Vec<u32> {
    YOUTUBE_AV1
        .windows(2)
        .filter(|w| w[1].median_bitrate_kbps < w[0].median_bitrate_kbps)
        .map(|w| w[1].resolution)
        .collect()
}

/// The reference table as pretty JSON.
pub fn to_json() -> String {
    serde_json::to_string_pretty(&YOUTUBE_AV1.to_vec()).expect("static data serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_5k_is_inverted() {
        assert_eq!(bitrate_inversions(), vec![2880]);
    }

    #[test]
    fn verbatim_rows() {
        assert_eq!(YOUTUBE_AV1.len(), 10);
        assert_eq!(YOUTUBE_AV1[8], row(2880, 13873.0, 56.7, 103.9));
        assert_eq!(YOUTUBE_AV1[9].median_bitrate_kbps, 37087.0);
    }

    #[test]
    fn top_rows_near_100_mb() {
        assert!(YOUTUBE_AV1[6..].iter().all(|r| r.buffer_size_mb > 90.0));
    }
}
