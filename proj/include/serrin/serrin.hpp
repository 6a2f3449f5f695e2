#pragma once

/// Convenience header pulling in the whole library.

#include "serrin/config.hpp"
#include "serrin/fields.hpp"
#include "serrin/finite_difference.hpp"
#include "serrin/identity_auditor.hpp"
#include "serrin/mixed_bvp_solver.hpp"
#include "serrin/operator_profiles.hpp"
#include "serrin/pfunction_auditor.hpp"
#include "serrin/quadrature.hpp"
#include "serrin/radial_oracles.hpp"
#include "serrin/reports.hpp"
#include "serrin/rigidity_lab.hpp"
#include "serrin/sector_mesh.hpp"
#include "serrin/space_form.hpp"
