void fill(int seed, int n);
int adler(int n);

int main(int seed, int n) {
    n = n & 255;
    fill(seed, n);
    return adler(n);
}
