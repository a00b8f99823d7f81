extern int buf[256];

int adler(int n) {
    int a = 1;
    int b = 0;
    int i;
    for (i = 0; i < n; i++) {
        a = (a + buf[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}
