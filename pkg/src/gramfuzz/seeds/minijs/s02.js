setin("pq");
print(tail());
