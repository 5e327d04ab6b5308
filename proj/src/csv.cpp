#include "poclab/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "poclab/util.hpp"

namespace poclab {

std::string scaled_path_csv(const ScaledPath& path) {
  std::string out = "t,i,X,Xhat_or_Xcheck,Lhat,E,A,D,T\n";
  for (std::size_t k = 0; k < path.t.size(); ++k) {
    for (int i = 0; i < path.N; ++i) {
      out += format_double(path.t[k]);
      out += ',';
      out += std::to_string(i + 1);
      out += ',';
      out += std::to_string(path.x[i][k]);
      out += ',';
      out += format_double(path.xs[i][k]);
      out += ',';
      out += format_double(path.lhat[i][k]);
      out += ',';
      out += std::to_string(path.e[i][k]);
      out += ',';
      out += std::to_string(path.a[i][k]);
      out += ',';
      out += std::to_string(path.d[i][k]);
      out += ',';
      out += format_double(path.busy[i][k]);
      out += '\n';
    }
  }
  return out;
}

std::string sde_path_csv(const SdePath& path) {
  std::string out = "t,i,X,L,beta\n";
  const std::size_t K = path.beta.empty() ? 0 : path.beta.front().size();
  for (std::size_t k = 0; k < path.t.size(); ++k) {
    for (int i = 0; i < path.N; ++i) {
      const std::size_t step = k < K ? k : (K == 0 ? 0 : K - 1);
      out += format_double(path.t[k]);
      out += ',';
      out += std::to_string(i + 1);
      out += ',';
      out += format_double(path.x[i][k]);
      out += ',';
      out += format_double(path.l[i][k]);
      out += ',';
      out += K == 0 ? std::string("0") : format_double(path.beta[i][step]);
      out += '\n';
    }
  }
  return out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace poclab
