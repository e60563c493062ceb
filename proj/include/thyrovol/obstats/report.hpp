#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "thyrovol/obstats/analysis.hpp"

namespace thyrovol::obstats {

// comparison,n,bias,sd,loa_low,loa_high,t,df,p,significant
void write_comparisons_csv(const std::vector<Comparison>& rows, std::ostream& out);

// Intraobserver variability per observer and modality with the 2D-vs-3D p.
// The method column records which variability formula was used.
void write_intraobserver_table(const std::vector<IntraobserverResult>& us2d,
                               const std::vector<IntraobserverResult>& us3d, const StatsConfig& cfg,
                               std::ostream& out);

// Mean +- SD of interobserver differences with p per pair and modality.
void write_interobserver_table(const std::vector<Comparison>& us2d, const std::vector<Comparison>& us3d,
                               std::ostream& out);

// Mean +- SD of volumes per observer against the reference with p.
void write_reference_table(const std::vector<ReferenceComparison>& us2d,
                           const std::vector<ReferenceComparison>& us3d, std::ostream& out);

// Standalone Bland-Altman plot: points, solid bias line, dashed limits of
// agreement, axes in ml. Output depends only on the inputs.
std::string bland_altman_svg(const BlandAltmanResult& r, const std::string& title);

}  // namespace thyrovol::obstats
