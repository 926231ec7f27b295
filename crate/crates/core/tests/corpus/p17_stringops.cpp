#include <iostream>
#include <string>

// unsafe: const@reverse_words const@vowels

std::string reverse_words(const std::string &s) {
  std::string out;
  std::string word;
  for (char c : s) {
    if (c == ' ') {
      out = word + (out.empty() ? "" : " ") + out;
      word.clear();
    } else {
      word += c;
    }
  }
  if (!word.empty())
    out = word + (out.empty() ? "" : " ") + out;
  return out;
}

int vowels(const std::string &s) {
  int n = 0;
  for (char c : s)
    if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u')
      n++;
  return n;
}

int main() {
  std::string line;
  while (std::getline(std::cin, line))
    std::cout << reverse_words(line) << " | " << vowels(line) << "\n";
  return 0;
}
