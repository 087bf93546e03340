#ifndef EMBP_SELFTEST_HPP
#define EMBP_SELFTEST_HPP

#include <iosfwd>

namespace embp {

/// Small-instance oracle battery: enumeration cross-checks for the trellis
/// and BP detectors, literal re-evaluations of the closed-form parameter
/// updates, bound checks for the evidence, momentum degeneracies, the
/// analytic AWGN BER anchor at reduced scale, and a byte-identity rerun of
/// a miniature sweep. Prints one line per check; returns overall success.
bool run_selftest(std::ostream& os);

} // namespace embp

#endif
