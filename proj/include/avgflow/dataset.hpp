#ifndef AVGFLOW_DATASET_HPP
#define AVGFLOW_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "avgflow/molecule.hpp"

namespace avgflow {

struct Molecule {
  std::string name;
  MoleculeGraph graph;
  ConformerEnsemble ensemble;
};

inline constexpr int kDatasetSchemaVersion = 1;

struct Dataset {
  int schema_version = kDatasetSchemaVersion;
  std::vector<Molecule> molecules;
};

struct GenConfig {
  int n_molecules = 32;
  int atoms_min = 5;
  int atoms_max = 16;
  int conformers_min = 1;
  int conformers_max = 4;
  std::uint64_t seed = 0;
  int pe_width = kDefaultPeWidth;
};

// Random connected bond graphs embedded by a short force-directed relaxation;
// conformers differ by dihedral-like rotations about bridge bonds. Output is
// deterministic per seed, every conformer centered.
Dataset gen_synthetic_dataset(const GenConfig& cfg);

// JSON dataset file with explicit schema version. Serialization is canonical
// (sorted keys, fixed layout) so save(load(f)) is a fixed point.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path, int pe_width = kDefaultPeWidth);

std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const std::string& text, int pe_width = kDefaultPeWidth);

}  // namespace avgflow

#endif
