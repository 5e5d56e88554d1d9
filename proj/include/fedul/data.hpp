#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fedul/numkernel.hpp"

namespace fedul {

using UserId = std::int64_t;
using ItemId = std::int64_t;

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  std::int64_t ts = 0;

  bool operator==(const Interaction&) const = default;
};

/// Protected attributes after preprocessing: gender in {0,1}, age bucket in
/// {0,1,2} (derived from raw years via configured thresholds).
struct UserAttribute {
  int gender = 0;
  int age_bucket = 0;

  bool operator==(const UserAttribute&) const = default;
};

/// Attributes as they appear in the raw files (age still in years).
struct RawAttribute {
  int gender = 0;
  int raw_age = 0;
};

struct Dataset {
  std::vector<UserId> users;  // sorted
  std::vector<ItemId> items;  // sorted
  std::vector<Interaction> train;  // sorted by (user, item)
  std::map<UserId, ItemId> test_holdout;
  std::map<UserId, UserAttribute> attrs;

  bool operator==(const Dataset&) const = default;
};

enum class MovielensFormat { Tab, DoubleColon };

struct ParseResult {
  std::vector<Interaction> interactions;  // deduplicated, sorted by (user, item)
  std::size_t malformed = 0;
};

/// Ratings file parser for the two MovieLens layouts:
///   Tab:         "user\titem\trating\ttimestamp"        (ML-100K u.data)
///   DoubleColon: "UserID::MovieID::Rating::Timestamp"   (ML-1M ratings.dat)
/// Any rating value collapses to an implicit positive. Duplicate (user, item)
/// pairs keep the latest timestamp. Malformed lines are counted, not fatal.
ParseResult parse_movielens(const std::filesystem::path& path, MovielensFormat format);

/// User attribute files:
///   DoubleColon: "UserID::Gender::Age::Occupation::Zip"  (ML-1M users.dat)
///   Tab:         "user|age|gender|occupation|zip"        (ML-100K u.user)
/// Gender letters map M -> 0, F -> 1.
std::map<UserId, RawAttribute> parse_attributes(const std::filesystem::path& path,
                                                MovielensFormat format);

/// Iterated k-core filter: removes users/items below the degree thresholds
/// until a fixpoint where every survivor satisfies both constraints.
std::vector<Interaction> filter_kcore(std::vector<Interaction> ints,
                                      std::size_t min_user, std::size_t min_item);

/// Bucket 0 if age < t1, 1 if t1 <= age <= t2, 2 if age > t2.
int discretize_age(int raw_age, std::pair<int, int> thresholds);

/// Assembles a Dataset from interactions and raw attributes. Users without
/// attributes are dropped; ages are discretized with the given thresholds.
Dataset make_dataset(const std::vector<Interaction>& ints,
                     const std::map<UserId, RawAttribute>& attrs,
                     std::pair<int, int> age_thresholds);

/// Downsamples the majority gender class uniformly to the minority count,
/// removing dropped users' interactions, attributes and holdouts.
Dataset balance_gender(Dataset ds, RngStream& rng);

/// Moves each user's most recent interaction (ties: larger item id) into
/// test_holdout. Every user must have at least two interactions.
Dataset leave_one_out_split(Dataset ds);

/// Synthetic attribute-correlated dataset: items split into gender-affinity
/// groups, popularity shared across groups, and `signal` controlling how much
/// of each user's activity stays inside the aligned group (0 = independent,
/// 1 = fully aligned).
Dataset synth_generate(std::size_t n_users, std::size_t n_items, double signal,
                       RngStream& rng);

/// Canonical JSON snapshot {users, items, train, test, attrs}; round-trips
/// byte-identically for a fixed Dataset.
std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace fedul
