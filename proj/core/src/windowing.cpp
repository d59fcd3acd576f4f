#include "asd/windowing.hpp"

#include <cmath>

#include "asd/errors.hpp"

namespace asd {

namespace {

long long window_start_sample(int t, int fps, int sample_rate, long long window_samples) {
    const double center = (t + 0.5) / fps;
    return std::llround(center * sample_rate) - window_samples / 2;
}

}  // namespace

WindowedAudio window_audio(const AudioSignal& audio, int frame_count, int fps,
                           double window_seconds) {
    if (audio.samples.empty()) throw ShapeError("window_audio over empty audio");
    if (frame_count < 1) throw ShapeError("window_audio needs frame_count >= 1");
    if (window_seconds <= 0.0) throw ShapeError("window_seconds must be > 0");
    const long long ws = std::llround(window_seconds * audio.sample_rate);
    WindowedAudio out;
    out.window_seconds = window_seconds;
    out.matrix = Tensor({frame_count, static_cast<int>(ws)});
    out.centers.reserve(frame_count);
    const long long n = static_cast<long long>(audio.samples.size());
    for (int t = 0; t < frame_count; ++t) {
        out.centers.push_back((t + 0.5) / fps);
        const long long start = window_start_sample(t, fps, audio.sample_rate, ws);
        for (long long k = 0; k < ws; ++k) {
            const long long src = start + k;
            out.matrix(t, static_cast<int>(k)) =
                (src >= 0 && src < n) ? audio.samples[static_cast<size_t>(src)] : 0.0;
        }
    }
    return out;
}

Tensor decimated_windows(const AudioSignal& audio, int frame_count, int fps,
                         double window_seconds, int factor) {
    if (audio.samples.empty()) throw ShapeError("decimated_windows over empty audio");
    if (frame_count < 1) throw ShapeError("decimated_windows needs frame_count >= 1");
    if (factor < 1) throw ShapeError("decimation factor must be >= 1");
    const long long ws = std::llround(window_seconds * audio.sample_rate);
    const int cols = static_cast<int>(ws / factor);
    Tensor out({frame_count, cols});
    const long long n = static_cast<long long>(audio.samples.size());
    for (int t = 0; t < frame_count; ++t) {
        const long long start = window_start_sample(t, fps, audio.sample_rate, ws);
        for (int k = 0; k < cols; ++k) {
            const long long src = start + static_cast<long long>(k) * factor;
            out(t, k) = (src >= 0 && src < n) ? audio.samples[static_cast<size_t>(src)] : 0.0;
        }
    }
    return out;
}

}  // namespace asd
