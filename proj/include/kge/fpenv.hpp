#pragma once

namespace kge {

/// Flushes denormal floats to zero (FTZ and DAZ) on the calling thread for
/// the guard's lifetime, restoring the previous mode afterwards. Saturated
/// sigmoids push gradients and Adam moments into the denormal range, where
/// x86 arithmetic is many times slower; training runs under this guard.
class FlushDenormals {
public:
    FlushDenormals();
    ~FlushDenormals();
    FlushDenormals(const FlushDenormals&) = delete;
    FlushDenormals& operator=(const FlushDenormals&) = delete;

private:
    unsigned saved_ = 0;
};

/// Whether denormals are currently flushed on the calling thread.
bool denormals_flushed();

} // namespace kge
