int fun3(int a, int b) {
    for (int i=0; i<100; i++) {
        a += b;
        if (a > 200 )
            break;
        b--;
    }
    return a;
}
