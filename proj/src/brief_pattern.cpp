// Generated by tools/scripts/gen_brief_pattern.py (seed 20200531); do not edit.
#include "treereg/image_features.hpp"

namespace treereg {

namespace {

constexpr BriefPair kPattern[256] = {
    {5, 10, 9, -2},
    {0, 2, 10, 1},
    {8, 6, 9, 3},
    {6, 0, -1, -12},
    {3, 4, -1, 5},
    {1, -6, 5, 2},
    {-2, -3, 1, 4},
    {-7, -3, -11, 3},
    {5, 0, 10, 3},
    {8, 3, -1, 0},
    {5, 3, 11, 2},
    {3, 8, 2, -2},
    {0, 1, -2, 9},
    {1, 4, -3, 0},
    {-9, 9, -6, -1},
    {4, 3, 5, 4},
    {1, 3, -6, -3},
    {-1, 1, -4, 5},
    {4, 2, 2, 4},
    {3, -1, 5, -1},
    {7, 7, -7, 5},
    {7, -5, 3, 0},
    {-2, 9, 2, 4},
    {8, -3, 2, 6},
    {0, 2, -4, 0},
    {0, -7, 2, -11},
    {-8, 4, 2, 5},
    {-3, -5, 4, -1},
    {-8, 3, -7, -5},
    {5, -3, -4, -9},
    {-2, 7, 4, 1},
    {4, 9, 0, -8},
    {-7, 2, -1, 4},
    {1, 2, -1, 7},
    {-1, -10, 2, 1},
    {9, -5, 6, 2},
    {1, 0, -4, -10},
    {4, 4, -1, -7},
    {-9, -2, 2, 7},
    {-4, -8, -12, 5},
    {3, 0, -11, -5},
    {3, 4, -3, -3},
    {1, 3, -1, 3},
    {-7, 3, -6, 3},
    {1, -2, -7, -4},
    {-5, 11, -3, -5},
    {3, 2, -3, 3},
    {6, -4, -7, -9},
    {2, 5, 4, 10},
    {2, 6, -3, -8},
    {8, 1, -1, -5},
    {8, -4, 2, -2},
    {5, 1, -2, -5},
    {-8, 2, 5, 1},
    {2, -3, 0, -10},
    {-12, 4, 6, 4},
    {6, 5, -4, -3},
    {-9, 0, 2, 5},
    {-10, 5, 11, 2},
    {-4, 4, 2, 6},
    {-10, 8, 2, 4},
    {-6, 1, 1, 8},
    {-6, 0, 8, 1},
    {-3, 2, 1, 9},
    {-5, 0, 0, 10},
    {-6, -1, -10, 1},
    {-6, -5, 9, -2},
    {0, -4, -1, -5},
    {9, 3, -6, -1},
    {-7, -8, -7, 7},
    {-3, 3, 2, -12},
    {-2, -2, 3, 2},
    {-6, -2, -4, 6},
    {-5, 4, -2, -2},
    {-8, -10, 6, -1},
    {3, -2, 1, -3},
    {3, 4, -7, 7},
    {-5, -1, 7, 2},
    {-5, -5, 0, -5},
    {-5, -4, 5, 4},
    {2, 1, 1, -5},
    {-8, 9, 3, -6},
    {3, 3, -1, 3},
    {-7, 10, -3, 0},
    {3, -9, -8, -4},
    {2, 1, -2, 1},
    {1, 0, -6, 9},
    {-6, 1, 0, 2},
    {4, -11, -2, -6},
    {-3, -2, -2, 4},
    {3, -3, 2, 12},
    {6, 7, -5, 5},
    {-1, 8, -11, -4},
    {3, -1, -2, -6},
    {2, 9, 3, 8},
    {5, -3, -7, -5},
    {0, 11, -3, 9},
    {-2, 6, 9, -1},
    {-6, 4, 1, -2},
    {0, 9, -2, 1},
    {-3, -2, -2, -8},
    {-1, -4, -3, 4},
    {-3, 12, 1, -5},
    {-3, 1, -9, -5},
    {-1, 7, 6, 11},
    {-6, -5, -2, 11},
    {3, -6, -12, -3},
    {9, 1, 4, -5},
    {-10, -6, 3, -6},
    {8, -2, -1, 4},
    {-3, 5, 1, -9},
    {1, -3, 4, -2},
    {10, -3, 3, 8},
    {-1, -7, 10, 7},
    {-1, 8, -6, -1},
    {5, -2, 2, -7},
    {-2, 8, 10, -3},
    {1, 1, -11, -3},
    {2, -1, 2, 10},
    {8, -6, 2, -4},
    {-2, -1, 0, -2},
    {2, 2, -2, 0},
    {-1, 0, 3, 0},
    {3, -1, -1, 2},
    {1, -1, -3, 1},
    {-8, -2, -2, 2},
    {-1, 4, -3, -5},
    {11, 6, 0, 4},
    {7, 3, -5, 6},
    {3, 6, 1, -4},
    {2, -4, 3, -3},
    {-8, -9, 3, 7},
    {3, -2, -2, -12},
    {1, -9, 5, -3},
    {3, -1, -3, 3},
    {3, -1, 2, 8},
    {-1, -9, 7, 3},
    {2, 1, 1, 2},
    {-7, 5, -2, 1},
    {-10, 2, 4, 3},
    {4, 2, 0, 4},
    {-3, 6, 11, -2},
    {10, -7, -2, -2},
    {-9, -3, 0, -2},
    {9, 8, -3, 8},
    {-6, -6, -2, -2},
    {-7, 5, -1, -1},
    {-8, -1, -7, 8},
    {-4, 6, -7, -5},
    {0, 2, -8, -1},
    {-6, -3, 6, 10},
    {0, -13, 7, 2},
    {-2, -6, 3, -9},
    {2, -3, -4, 1},
    {6, 0, -2, -6},
    {-6, -6, -3, -1},
    {3, 3, 0, -5},
    {-6, -7, -5, 7},
    {0, 4, 3, -7},
    {0, 2, 0, -3},
    {2, 1, -4, 0},
    {-1, 2, -2, -9},
    {-5, 0, 4, 8},
    {-10, 5, -7, 10},
    {2, 2, 0, -4},
    {3, 5, -1, -4},
    {-4, -7, -9, 5},
    {6, 0, -7, -5},
    {4, 0, -4, -5},
    {-7, 1, -10, -2},
    {3, 3, -1, -2},
    {8, 9, -10, 4},
    {-2, 2, 3, 1},
    {-4, 1, 4, 0},
    {0, 13, -3, -5},
    {-13, 0, 3, -5},
    {9, -6, 1, 0},
    {-3, 3, -4, -1},
    {0, -6, 7, 7},
    {3, -8, -2, -5},
    {5, -2, -2, -6},
    {-6, 2, 1, -3},
    {5, 2, 3, -11},
    {2, -3, -4, -5},
    {-12, -1, -7, 3},
    {2, 10, 2, 2},
    {-4, -9, 5, 1},
    {-5, -1, 6, 0},
    {1, 3, 3, 0},
    {-7, 1, 6, 3},
    {2, 3, 3, 2},
    {0, -8, -4, 1},
    {-2, 1, 1, -5},
    {-4, 4, -1, 2},
    {5, 0, 1, 1},
    {9, -6, -2, -2},
    {-6, -2, -9, 6},
    {1, -1, 4, 1},
    {-1, 1, -2, 8},
    {-4, 3, -1, -2},
    {5, -10, -3, -3},
    {8, 4, -6, 3},
    {9, -3, -5, -2},
    {3, -5, -7, -7},
    {2, -3, -2, 4},
    {3, 8, -2, 8},
    {-2, -7, -4, 0},
    {-6, 3, 1, -4},
    {7, 1, 3, -4},
    {1, 5, 2, -5},
    {5, 0, -2, 7},
    {-4, -5, -2, -12},
    {-1, 4, -2, -3},
    {-4, 0, -2, 4},
    {6, -1, -5, 5},
    {-10, 2, -2, -4},
    {-1, 5, 8, 7},
    {-2, 0, 7, -2},
    {-1, -10, -1, 5},
    {9, -1, -9, 2},
    {-2, -5, -1, 9},
    {1, -3, -2, 0},
    {7, 2, -9, -8},
    {-9, -7, 0, 3},
    {7, 0, 3, 6},
    {4, 1, 10, 5},
    {2, 3, 4, -2},
    {3, -4, 2, -1},
    {0, 4, -5, 6},
    {4, -12, 7, -6},
    {0, -7, 2, -2},
    {-4, -8, 4, 0},
    {2, 1, 4, 8},
    {6, -11, 1, 0},
    {11, -1, -1, -2},
    {-3, 0, 6, 1},
    {-5, 4, -4, 7},
    {8, -10, 9, -2},
    {0, 4, 10, 0},
    {3, 8, 5, 2},
    {2, -9, -5, 1},
    {-8, 2, 0, -9},
    {4, -1, -1, -4},
    {-3, 1, -6, -2},
    {-3, -1, -2, -7},
    {-6, -2, -1, 2},
    {0, 8, -7, -3},
    {-1, -2, -6, -1},
    {2, 10, 1, 1},
    {0, -10, 2, -5},
    {-5, -11, -6, 2},
    {-2, -2, 5, -10},
    {4, -10, 0, -5},
    {2, 4, 4, 9},
    {5, -8, 8, -6},
    {3, -1, 4, 11}};

}  // namespace

std::span<const BriefPair, 256> brief_pattern() { return std::span<const BriefPair, 256>(kPattern); }

}  // namespace treereg
