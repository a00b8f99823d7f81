void fill_keys(int seed);
int find(int target, int limit);

int main(int seed, int target) {
    fill_keys(seed);
    return find(target & 255, 200) * 3 + find((target >> 8) & 255, 100);
}
