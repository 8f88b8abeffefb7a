#include <vector>

#include "dcgsql/sqlkit.hpp"

namespace dcgsql {

namespace {

struct FlatTree {
  std::vector<std::string> labels;  // postorder
  std::vector<int> lld;             // leftmost leaf descendant, postorder index
  std::vector<int> keyroots;        // ascending
};

int flatten(const TreeNode& node, FlatTree& out) {
  int first_ll = -1;
  for (const auto& child : node.children) {
    int ci = flatten(child, out);
    if (first_ll == -1) first_ll = out.lld[ci];
  }
  out.labels.push_back(node.label);
  int idx = static_cast<int>(out.labels.size()) - 1;
  out.lld.push_back(first_ll == -1 ? idx : first_ll);
  return idx;
}

FlatTree flat_tree(const TreeNode& root) {
  FlatTree f;
  flatten(root, f);
  // keyroots: the highest postorder node for each leftmost-leaf value
  std::vector<int> highest(f.labels.size(), -1);
  for (int i = 0; i < static_cast<int>(f.labels.size()); ++i) highest[f.lld[i]] = i;
  for (int i = 0; i < static_cast<int>(f.labels.size()); ++i)
    if (highest[f.lld[i]] == i) f.keyroots.push_back(i);
  return f;
}

}  // namespace

int tree_edit_distance(const TreeNode& a, const TreeNode& b) {
  FlatTree ta = flat_tree(a);
  FlatTree tb = flat_tree(b);
  const int na = static_cast<int>(ta.labels.size());
  const int nb = static_cast<int>(tb.labels.size());
  std::vector<std::vector<int>> td(na, std::vector<int>(nb, 0));

  for (int kr_a : ta.keyroots) {
    for (int kr_b : tb.keyroots) {
      const int la = ta.lld[kr_a];
      const int lb = tb.lld[kr_b];
      const int m = kr_a - la + 2;
      const int n = kr_b - lb + 2;
      std::vector<std::vector<int>> fd(m, std::vector<int>(n, 0));
      for (int i = 1; i < m; ++i) fd[i][0] = fd[i - 1][0] + 1;
      for (int j = 1; j < n; ++j) fd[0][j] = fd[0][j - 1] + 1;
      for (int i = la; i <= kr_a; ++i) {
        for (int j = lb; j <= kr_b; ++j) {
          const int di = i - la + 1;
          const int dj = j - lb + 1;
          if (ta.lld[i] == la && tb.lld[j] == lb) {
            int relabel = ta.labels[i] == tb.labels[j] ? 0 : 1;
            fd[di][dj] = std::min({fd[di - 1][dj] + 1, fd[di][dj - 1] + 1,
                                   fd[di - 1][dj - 1] + relabel});
            td[i][j] = fd[di][dj];
          } else {
            fd[di][dj] = std::min({fd[di - 1][dj] + 1, fd[di][dj - 1] + 1,
                                   fd[ta.lld[i] - la][tb.lld[j] - lb] + td[i][j]});
          }
        }
      }
    }
  }
  return td[na - 1][nb - 1];
}

int tree_edit_distance(const SqlAst& a, const SqlAst& b) {
  return tree_edit_distance(ast_tree(a), ast_tree(b));
}

}  // namespace dcgsql
