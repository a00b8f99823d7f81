int sieve(int n);

int main(int n, int m) {
    return sieve((n & 255) + 1) * 1000 + sieve((m & 63) + 1);
}
