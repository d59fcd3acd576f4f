#pragma once

#include "asd/corpus.hpp"
#include "asd/tensor.hpp"

namespace asd {

// Per-video-frame audio windows: row t covers the window_seconds of signal
// centred on frame t's midpoint, zero-padded outside the signal bounds. The
// row count always equals the video frame count T, never the audio sample
// count; this is how the modality sampling rates are reconciled.
struct WindowedAudio {
    Tensor matrix;  // [T, window_samples]
    double window_seconds = 1.0;
    std::vector<double> centers;  // frame-center timestamps, seconds

    int frames() const { return matrix.rows(); }
    int window_samples() const { return matrix.cols(); }
};

// Start sample of row t = round(((t + 0.5) / fps) * sample_rate) - W_s / 2.
WindowedAudio window_audio(const AudioSignal& audio, int frame_count, int fps,
                           double window_seconds = 1.0);

// Strided variant used by the ASD audio encoder: row t holds every
// `factor`-th sample of the same window, so a [T, W_s/factor] matrix.
// Identical to taking window_audio rows and decimating them.
Tensor decimated_windows(const AudioSignal& audio, int frame_count, int fps,
                         double window_seconds, int factor);

}  // namespace asd
