#pragma once

namespace nowcast {

// Pipeline scalar precision, selected at build time (-DNOWCAST_REAL64 for
// 64-bit). Gradient checks always run on the double instantiation.
#ifdef NOWCAST_REAL64
using real_t = double;
#else
using real_t = float;
#endif

}  // namespace nowcast
