int signal[96];
int taps[8];
int filtered[96];

void make_signal(int seed) {
    int i;
    for (i = 0; i < 96; i++)
        signal[i] = ((seed + i * 37) % 201) - 100;
    for (i = 0; i < 8; i++)
        taps[i] = (seed >> i & 7) - 3;
}
