#pragma once

#include <string>

#include "poclab/queue_sim.hpp"
#include "poclab/sde_sim.hpp"

namespace poclab {

// One row per (grid time, server):
// t,i,X,Xhat_or_Xcheck,Lhat,E,A,D,T   (server index i is 1-based)
std::string scaled_path_csv(const ScaledPath& path);

// One row per (grid time, coordinate): t,i,X,L,beta. The beta column is
// the drift used on the step starting at t; the terminal row repeats the
// last step's value.
std::string sde_path_csv(const SdePath& path);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace poclab
