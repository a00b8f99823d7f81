void make_samples(int seed, int n);
int histogram(int n);

int main(int seed, int n) {
    n = n & 127;
    make_samples(seed, n);
    return histogram(n);
}
