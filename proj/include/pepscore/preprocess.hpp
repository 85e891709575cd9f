#pragma once

#include "pepscore/spectrum.hpp"

namespace pepscore {

// Single-linkage pooling of near-by peaks, scanning in ascending m/z:
// a peak within `tol` of the previous peak joins its cluster. Each cluster
// is replaced by one peak at the m/z of its most intense member (lowest m/z
// wins ties) carrying the summed intensity.
Spectrum cluster_peaks(const Spectrum& s, double tol);

// Divides every intensity by the 90th-percentile intensity, computed by the
// nearest-rank method (the ceil(0.9*n)-th smallest). Throws if the divisor
// is not positive (all-zero or near-all-zero spectra cannot be normalized).
Spectrum normalize(const Spectrum& s);

// Fourth-root transform of the intensities.
Spectrum stabilize(const Spectrum& s);

// cluster_peaks, then normalize, then stabilize. Applied identically to
// observed and theoretical spectra.
Spectrum preprocess(const Spectrum& s, double tol);

}  // namespace pepscore
