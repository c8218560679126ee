#include "kge/fpenv.hpp"

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#define KGE_HAS_MXCSR 1
#endif

namespace kge {

namespace {

#ifdef KGE_HAS_MXCSR
constexpr unsigned kFlushBits = 0x8040; // FTZ (bit 15) | DAZ (bit 6)
#endif

} // namespace

FlushDenormals::FlushDenormals() {
#ifdef KGE_HAS_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | kFlushBits);
#endif
}

FlushDenormals::~FlushDenormals() {
#ifdef KGE_HAS_MXCSR
    _mm_setcsr(saved_);
#endif
}

bool denormals_flushed() {
#ifdef KGE_HAS_MXCSR
    return (_mm_getcsr() & kFlushBits) == kFlushBits;
#else
    return false;
#endif
}

} // namespace kge
