#pragma once

#include <string_view>
#include <vector>

#include "hail/annotation.h"
#include "hail/namenode.h"
#include "hail/record_reader.h"

namespace hail {

enum class SplittingPolicy { kHail, kDefault };

std::string_view SplittingPolicyName(SplittingPolicy policy);

struct BlockRef {
  BlockId block;
  int target = 0;

  bool operator==(const BlockRef&) const = default;
};

struct InputSplit {
  int id = 0;
  std::vector<BlockRef> blocks;
  ScanMode mode = ScanMode::kFullScan;
};

// First filter attribute, in conjunct order, that some live replica of some
// block is indexed on; 0 if none.
int ChooseIndexAttribute(const Namenode& namenode, const std::vector<BlockId>& blocks, const BoundQuery& query);

// With a usable index: blocks grouped by their preferred host, and each
// group spread round-robin over min(map_slots, group size) splits. Without
// one: a FULL_SCAN split per block.
std::vector<InputSplit> HailSplitting(const Namenode& namenode, const std::vector<BlockId>& blocks,
                                      int index_attribute, int map_slots);

// One split per block, placed on the preferred host.
std::vector<InputSplit> DefaultSplitting(const Namenode& namenode, const std::vector<BlockId>& blocks,
                                         int index_attribute);

}  // namespace hail
