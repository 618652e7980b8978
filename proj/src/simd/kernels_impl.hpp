#pragma once

#include "dppnet/simd.hpp"

namespace dppnet::simd::detail {

extern const KernelTable kScalarTable;
#if defined(DPPNET_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(DPPNET_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif

}  // namespace dppnet::simd::detail
